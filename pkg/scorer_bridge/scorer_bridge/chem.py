"""Chemistry oracle: penalized logP over SMILES strings.

Requires RDKit.  The score is the standard penalized logP used across the
molecular-design benchmarks: octanol-water partition coefficient minus the
synthetic-accessibility score minus a large-ring penalty (cycles beyond six
atoms), each term z-normalized with the constants fitted on the ZINC 250k
set.  An unparsable SMILES answers ``ERR invalid_smiles``, which engines
map to their penalizing reward.
"""

from __future__ import annotations

# ZINC-250k normalization constants, as used by the common public
# implementations of this benchmark
LOGP_MEAN, LOGP_STD = 2.4570953396190123, 1.434324401111988
SA_MEAN, SA_STD = 3.0525811293166134, 0.8335207024513095
CYCLE_MEAN, CYCLE_STD = 0.0485696876403053, 0.2860212110245455


def _require_rdkit():
    try:
        from rdkit import Chem
        from rdkit.Chem import Crippen
        from rdkit.Chem import rdmolops
        from rdkit.Contrib.SA_Score import sascorer  # type: ignore
    except ImportError as exc:
        raise SystemExit(
            "the chemistry oracle needs RDKit (pip install rdkit); "
            "use the echo oracle instead: scorer-bridge echo"
        ) from exc
    return Chem, Crippen, rdmolops, sascorer


def make_scorer():
    Chem, Crippen, rdmolops, sascorer = _require_rdkit()

    def score(smiles: str) -> float:
        mol = Chem.MolFromSmiles(smiles)
        if mol is None:
            raise ValueError("invalid_smiles")
        log_p = Crippen.MolLogP(mol)
        sa = sascorer.calculateScore(mol)
        rdmolops.GetSSSR(mol)  # ensure ring perception
        largest = 0
        for ring in mol.GetRingInfo().AtomRings():
            largest = max(largest, len(ring))
        cycle_penalty = max(largest - 6, 0)
        return (
            (log_p - LOGP_MEAN) / LOGP_STD
            - (sa - SA_MEAN) / SA_STD
            - (cycle_penalty - CYCLE_MEAN) / CYCLE_STD
        )

    return score


SMILES_SYMBOLS = list("CNOFcno123456789()=#[]") + ["Cl", "Br", "\n"]


def priors(prefix: str) -> list[tuple[str, float]]:
    share = 1.0 / len(SMILES_SYMBOLS)
    return [(symbol, share) for symbol in SMILES_SYMBOLS]
