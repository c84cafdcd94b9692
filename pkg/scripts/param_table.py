"""Print parameter counts for every encoder/scoring combination.

Usage:
    python3 scripts/param_table.py [--embed-dim 768] [--model-dim 256]
"""

import argparse
import sys

from newsrec.model import ModelConfig
from newsrec.training import count_params


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--embed-dim", type=int, default=768)
    parser.add_argument("--model-dim", type=int, default=256)
    args = parser.parse_args(argv)

    print(f"{'encoders':<10} {'scoring':<10} {'total params':>14}")
    for encoder in ("attention", "mean"):
        for scoring in ("inner", "bilinear", "nonlinear", "mlp"):
            cfg = ModelConfig(dim=args.model_dim, news_encoder=encoder,
                              user_encoder=encoder, scoring=scoring)
            _, total = count_params(cfg, args.embed_dim)
            print(f"{encoder:<10} {scoring:<10} {total:>14,}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
