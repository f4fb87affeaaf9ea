#!/usr/bin/env python3
"""Export a pretrained gensim vector set to word2vec text format.

The embedding encoder reads plain word2vec text files.  gensim is only
needed for this one-off export, it is not a package dependency:

    python3 -m pip install gensim
    python3 scripts/export_vectors.py \
        --name glove-wiki-gigaword-100 --out data/glove-wiki-gigaword-100.txt
"""

import argparse
import sys


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--name", default="glove-wiki-gigaword-100",
                        help="gensim-downloader model name")
    parser.add_argument("--out", required=True, help="word2vec text file to write")
    args = parser.parse_args(argv)

    try:
        import gensim.downloader
    except ImportError:
        print("error: gensim is not installed (python3 -m pip install gensim)", file=sys.stderr)
        return 1

    vectors = gensim.downloader.load(args.name)
    vectors.save_word2vec_format(args.out, binary=False)
    print(f"wrote {len(vectors)} vectors of dimension {vectors.vector_size} to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
