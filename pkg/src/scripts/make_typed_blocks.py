import argparse
import logging
from pathlib import Path

from semkge.tools.ingest import stats, write_dataset
from semkge.tools.synthetic import linked_blocks, typed_blocks

# Setup logging
logging.basicConfig(level=logging.INFO, format='%(levelname)s: %(message)s')
logger = logging.getLogger(__name__)

LAYOUTS = {"blocks": typed_blocks, "linked": linked_blocks}


def make_typed_blocks(out_dir: Path, seed: int = 0, layout: str = "blocks") -> None:
    kg = LAYOUTS[layout](seed)
    paths = write_dataset(kg, out_dir)
    logger.info(f"Wrote {layout} dataset to {paths.train.parent}")
    print(stats(kg).format_table(f"typed-{layout}"))


if __name__ == "__main__":
    repo_root = Path(__file__).resolve().parents[2]
    parser = argparse.ArgumentParser(description="Write a synthetic two-type dataset as TSV files")
    parser.add_argument("--out", type=Path, default=repo_root / "data" / "typed_blocks")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument(
        "--layout",
        choices=sorted(LAYOUTS),
        default="blocks",
        help="blocks: disjoint typed blocks; linked: chained groups with one-to-one links across types",
    )
    args = parser.parse_args()
    make_typed_blocks(args.out, args.seed, args.layout)
