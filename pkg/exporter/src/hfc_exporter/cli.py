"""Command-line entry: hfc-export --claims ... --model ... --out ... --manifest ..."""
import argparse
import sys

from heterfc.errors import CorpusError

from .export import export_files


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="hfc-export",
        description="Export contextual embeddings for a claims file.")
    ap.add_argument("--claims", required=True)
    ap.add_argument("--model", required=True,
                    help="encoder name or local model directory")
    ap.add_argument("--out", required=True, help="output .hfce path")
    ap.add_argument("--manifest", required=True, help="output manifest JSON path")
    ap.add_argument("--max-length", type=int, default=256)
    ap.add_argument("--strict", action="store_true",
                    help="fail if any claim is skipped")
    args = ap.parse_args(argv)

    try:
        result = export_files(args.claims, args.model, args.out, args.manifest,
                              max_length=args.max_length)
    except (CorpusError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {result.n_keys} keys for {result.n_claims} claims "
          f"(dim {result.dim}, {len(result.skipped)} skipped)")
    if result.skipped and args.strict:
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
