"""Entry point: ``scorer-bridge echo`` or ``scorer-bridge chem``."""

from __future__ import annotations

import argparse
import sys

from scorer_bridge import echo, protocol


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="scorer-bridge",
        description="reward/prior oracle on stdin/stdout",
    )
    parser.add_argument("oracle", choices=["echo", "chem"])
    args = parser.parse_args(argv)
    if args.oracle == "echo":
        protocol.serve(echo.score, echo.priors)
    else:
        from scorer_bridge import chem

        protocol.serve(chem.make_scorer(), chem.priors)
    return 0


if __name__ == "__main__":
    sys.exit(main())
