"""Reward/prior oracle processes for search engines, speaking a one-line
request/response protocol over standard streams."""
