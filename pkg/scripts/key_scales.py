"""Print the 24-key correlation table for every major and natural minor
ascending scale, marking the best key per row.

    python scripts/key_scales.py [--config analysis.cfg]
"""

import argparse

import numpy as np

from staffline.analysis import AnalysisConfig, key_correlations, load_config

NAMES = ["C", "C#", "D", "Eb", "E", "F", "F#", "G", "Ab", "A", "Bb", "B"]
SCALES = {"major": (0, 2, 4, 5, 7, 9, 11, 12), "minor": (0, 2, 3, 5, 7, 8, 10, 12)}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", help="analysis configuration file")
    args = ap.parse_args()
    config = load_config(args.config) if args.config else AnalysisConfig()
    labels = [n for n in NAMES] + [n.lower() for n in NAMES]
    print("scale  " + " ".join(f"{k:>6}" for k in labels))
    hits = 0
    for mode, steps in SCALES.items():
        for tonic in range(12):
            corr = key_correlations([(60 + tonic + s, 1.0) for s in steps], config.profiles)
            best = int(np.argmax(corr))
            hits += best == tonic + 12 * (mode == "minor")
            name = NAMES[tonic] if mode == "major" else NAMES[tonic].lower()
            cells = [f"{c:6.3f}" + ("*" if i == best else " ") for i, c in enumerate(corr)]
            print(f"{name:>5}  " + "".join(cells))
    print(f"\n{hits}/24 scales classified to their own key")


if __name__ == "__main__":
    main()
