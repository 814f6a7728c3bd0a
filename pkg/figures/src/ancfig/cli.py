"""Figure rendering CLI: `ancfig render --spec file.json` or a preset
name with --input-dir pointing at the simulation output directory."""

from __future__ import annotations

import argparse
import sys

import matplotlib.pyplot as plt

from .render import SchemaError, load_spec, preset_specs, render

PRESETS = ("fig2-saturation", "fig3-static", "fig5-varying")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ancfig", description="Render ANC experiment figures from "
                                   "simulation output files")
    sub = parser.add_subparsers(dest="command", required=True)

    rend = sub.add_parser("render", help="render a single figure spec")
    rend.add_argument("--spec", required=True, help="FigureSpec JSON file")
    rend.set_defaults(func=cmd_render)

    for preset in PRESETS:
        p = sub.add_parser(preset,
                           help=f"render the {preset} figures")
        p.add_argument("--input-dir", default="out",
                       help="simulation output directory")
        p.add_argument("--output-dir", default="figures-out")
        p.set_defaults(func=cmd_preset, preset=preset)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SchemaError as err:
        print(f"input error: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"i/o error: {err}", file=sys.stderr)
        return 4


def cmd_render(args) -> int:
    result = render(load_spec(args.spec))
    plt.close(result.figure)
    print(f"wrote {result.png} and {result.svg}")
    return 0


def cmd_preset(args) -> int:
    for spec in preset_specs(args.preset, args.input_dir, args.output_dir):
        result = render(spec)
        plt.close(result.figure)
        print(f"wrote {result.png} and {result.svg}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
