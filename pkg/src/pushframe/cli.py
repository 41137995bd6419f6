from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from dotenv import load_dotenv
from pydantic import ValidationError

from .orchestrator import PushframeConfig, PushframeOrchestrator

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NOT_CONVERGED = 3

logger = logging.getLogger("pushframe")


def _floats(text: str) -> list[float]:
    """Comma-separated values; a trailing % means percent."""
    values = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        values.append(float(item[:-1]) / 100.0 if item.endswith("%") else float(item))
    return values


def _ints(text: str) -> list[int]:
    return [int(item) for item in text.split(",") if item.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Simulate pushframe compressive capture and reconstruct the scene."
    )
    parser.add_argument("--config", type=Path, help="Optional path to configuration JSON/YAML")
    parser.add_argument("--verbose", action="store_true", help="Log per-block and per-stage detail")
    commands = parser.add_subparsers(dest="command", required=True)

    plan = commands.add_parser("plan", help="Draw per-column row assignments and write the plan JSON")
    plan.add_argument("--n", type=int, help="Column height (power of two)")
    amount = plan.add_mutually_exclusive_group()
    amount.add_argument("--rate", type=float, help="Sampling rate m/n in [0, 1]")
    amount.add_argument("--m", type=int, help="Complex rows per column (even)")
    plan.add_argument("--block-width", type=int)
    plan.add_argument("--ordering", choices=["pastuszczak", "mirrored"])
    plan.add_argument("--naive", action="store_true", help="Repeat the first assignment in every column")
    plan.add_argument("--seed", type=int)
    plan.add_argument("--out", type=Path, required=True, help="Output directory")

    pattern = commands.add_parser("pattern", help="Write the n x (n+1) mask as PGM")
    pattern.add_argument("--n", type=int)
    pattern.add_argument("--ordering", choices=["pastuszczak", "mirrored"])
    pattern.add_argument("--out", type=Path, required=True, help="Output PGM path")

    capture = commands.add_parser("capture", help="Scan a scene past the mask and write the sample matrix")
    capture.add_argument("--scene", default="natural", help="PGM path or synthetic scene name")
    capture.add_argument("--width", type=int, help="Width for synthetic scenes")
    capture.add_argument("--plan", type=Path, help="Plan JSON (mask size and ordering)")
    capture.add_argument("--direction", choices=["forward", "reversed"])
    capture.add_argument("--noise-sigma", type=float)
    capture.add_argument("--white", action="store_true", help="Capture a uniform white field and write flat-field gains")
    capture.add_argument("--flatfield", type=Path, help="flatfield.json to apply to this capture")
    capture.add_argument("--out", type=Path, required=True, help="Output directory")

    reconstruct = commands.add_parser("reconstruct", help="Retain samples at a rate and reconstruct the scene")
    reconstruct.add_argument("--samples", type=Path, required=True, help="samples.npz from capture")
    reconstruct.add_argument("--plan", type=Path)
    reconstruct.add_argument("--rate", type=float)
    reconstruct.add_argument("--block-width", type=int)
    reconstruct.add_argument("--truth", help="Ground-truth image (path or synthetic name) for PSNR/SSIM")
    reconstruct.add_argument("--out", type=Path, required=True, help="Output directory")
    reconstruct.add_argument("--report", type=Path, help="Report JSON path (defaults into --out)")

    sweep = commands.add_parser("sweep", help="Quality versus rate and block width for every method")
    sweep.add_argument("--scene", default="natural")
    sweep.add_argument("--rates", type=_floats, help="e.g. 20%%,40%% or 0.2,0.4")
    sweep.add_argument("--block-widths", type=_ints)
    sweep.add_argument("--methods", type=lambda text: [m.strip() for m in text.split(",") if m.strip()])
    sweep.add_argument("--out-csv", type=Path, required=True)

    pan = commands.add_parser("pan", help="Pan-sharpened versus independent colour recovery")
    pan.add_argument("--scene-color", default="colour")
    pan.add_argument("--mbar-list", type=_floats, help="Effective rates, e.g. 15%%,25%%,40%%")
    pan.add_argument("--grid", type=_floats, help="m_pan fractions of n to search")
    pan.add_argument("--block-width", type=int)
    pan.add_argument("--out-csv", type=Path, required=True)
    return parser


def _run(args: argparse.Namespace, orchestrator: PushframeOrchestrator) -> int:
    if args.command == "plan":
        plan = orchestrator.make_plan(
            args.out,
            n=args.n,
            m=args.m,
            rate=args.rate,
            block_width=args.block_width,
            ordering=args.ordering,
            naive=args.naive or None,
            seed=args.seed,
        )
        print(f"Wrote plan (slm {plan.slm_hash[:12]}...) to {args.out / 'plan.json'}")
        return EXIT_OK

    if args.command == "pattern":
        digest = orchestrator.write_pattern(args.out, n=args.n, ordering=args.ordering)
        print(f"Wrote mask to {args.out} (sha256 {digest})")
        return EXIT_OK

    if args.command == "capture":
        samples = orchestrator.capture_scene(
            args.scene,
            args.out,
            plan_path=args.plan,
            direction=args.direction,
            noise_sigma=args.noise_sigma,
            width=args.width,
            white=args.white,
            flatfield_path=args.flatfield,
        )
        print(f"Wrote {samples.width}x{samples.n_patterns} sample matrix to {args.out}")
        return EXIT_OK

    if args.command == "reconstruct":
        result = orchestrator.reconstruct(
            args.samples,
            args.out,
            plan_path=args.plan,
            rate=args.rate,
            block_width=args.block_width,
            report_path=args.report,
            truth=args.truth,
        )
        print(f"Wrote reconstruction to {result.image_path}")
        if not result.report.converged:
            logger.warning("⚠️  Some blocks did not converge; see %s", result.report_path)
            return EXIT_NOT_CONVERGED
        return EXIT_OK

    if args.command == "sweep":
        rows = orchestrator.sweep(
            args.scene,
            args.out_csv,
            rates=args.rates,
            block_widths=args.block_widths,
            methods=args.methods,
        )
        print(f"Wrote {len(rows)} sweep rows to {args.out_csv}")
        return EXIT_OK if all(row.converged for row in rows) else EXIT_NOT_CONVERGED

    if args.command == "pan":
        result = orchestrator.pan(
            args.scene_color,
            args.out_csv,
            mbar_rates=args.mbar_list,
            grid=args.grid,
            block_width=args.block_width,
        )
        print(f"Wrote {len(result.rows)} pan rows to {result.csv_path}")
        return EXIT_OK

    raise ValueError(f"Unknown command '{args.command}'")


def main(argv: list[str] | None = None) -> int:
    load_dotenv()
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(message)s",
        stream=sys.stdout,
        force=True,
    )

    try:
        config = PushframeConfig.from_file(args.config) if args.config else PushframeConfig()
        orchestrator = PushframeOrchestrator.default(config)
        return _run(args, orchestrator)
    except (ValueError, ValidationError, OSError) as exc:
        logger.error("💥  %s", exc)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
