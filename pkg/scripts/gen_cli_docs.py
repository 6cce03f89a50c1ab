"""Regenerate docs/cli.md from the argparse definitions.

    python scripts/gen_cli_docs.py
"""

import argparse
from pathlib import Path

from bgwlab.cli import build_parser


def walk(parser, prefix, out):
    out.append(f"## {prefix}\n\n```\n{parser.format_help().rstrip()}\n```\n")
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            for name, sub in action.choices.items():
                walk(sub, f"{prefix} {name}", out)


def main():
    out = ["# bgwlab command reference\n",
           "Generated by `scripts/gen_cli_docs.py`; do not edit by hand.\n"]
    walk(build_parser(), "bgwlab", out)
    path = Path(__file__).resolve().parents[1] / "docs" / "cli.md"
    path.write_text("\n".join(out))
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
