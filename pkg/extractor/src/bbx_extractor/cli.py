"""Command-line entry point: bbx-extract.

Reads a corpus from a JSONL file (one {"doc_id", "text"} or
{"doc_id", "sentences": [...]} object per line) or from a directory of
.txt files (doc_id = file stem, files taken in sorted order) and writes
a BBX hidden-state file.

Exit codes: 0 success, 1 extraction/format errors, 2 missing input.
"""

import argparse
import json
import sys
from pathlib import Path

from ._bbx import BbxError
from .embedder import ModelLoadError
from .extract import ExtractionError, ExtractorConfig, extract_to_bbx


def load_records(path: Path):
    if path.is_dir():
        files = sorted(path.glob("*.txt"))
        if not files:
            raise FileNotFoundError(f"no .txt files in directory {path}")
        return [{"doc_id": f.stem, "text": f.read_text(encoding="utf-8")}
                for f in files]
    if not path.exists():
        raise FileNotFoundError(f"input not found: {path}")
    if path.suffix != ".jsonl":
        raise ExtractionError(
            f"input must be a .jsonl file or a directory of .txt files, got {path}")
    records = []
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ExtractionError(f"{path}:{n}: invalid JSON ({exc})")
    return records


def build_parser():
    p = argparse.ArgumentParser(
        prog="bbx-extract",
        description="Segment text corpora and extract per-sentence "
                    "hidden states into a BBX file.")
    p.add_argument("--input", required=True,
                   help="JSONL corpus file or directory of .txt files")
    p.add_argument("--output", required=True, help="BBX file to write")
    p.add_argument("--model", default="hashed-32",
                   help="'hashed[-DIM]' for the offline hash embedder, or a "
                        "pretrained transformers model name (default: hashed-32)")
    p.add_argument("--pooling", default="last_token_final_layer",
                   choices=["last_token_final_layer", "mean_final_layer"])
    p.add_argument("--splitter", default="regex", choices=["regex", "lines"])
    p.add_argument("--max-tokens", type=int, default=128,
                   help="truncate sentences beyond this many tokens")
    p.add_argument("--device", default="cpu")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        records = load_records(Path(args.input))
        cfg = ExtractorConfig(model=args.model, device=args.device,
                              splitter=args.splitter, pooling=args.pooling,
                              max_tokens=args.max_tokens)
        summary = extract_to_bbx(records, args.output, cfg)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ExtractionError, BbxError, ModelLoadError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {summary.n_docs} docs ({summary.n_sentences} sentences, "
          f"dim {summary.dim}) to {summary.path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
