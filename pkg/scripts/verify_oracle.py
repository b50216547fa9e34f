#!/usr/bin/env python3
"""Cross-check the engine against the brute-force oracle on random scenes.

Generates seeded random videos with random perturbations and asserts exact
equality between the windowed engine and the naive pixel-time-set oracle.

Usage: python scripts/verify_oracle.py [--videos 100] [--start-seed 0]
"""

import argparse
import time

import numpy as np

from vpseval import evaluate_videos, sim
from vpseval.vpq import VpqConfig


def random_dataset(seed):
    rng = np.random.default_rng(seed)
    taxonomy = sim.random_taxonomy(rng)
    stride = int(rng.integers(1, 4))
    videos, preds = [], []
    for i in range(int(rng.integers(1, 3))):
        spec = sim.random_scene_spec(rng, taxonomy, stride=stride, video_id=f"v{i}")
        video = sim.generate(spec, taxonomy)
        perturbations = sim.random_perturbations(rng, video, taxonomy)
        videos.append(video)
        preds.append(sim.perturb(video, perturbations, taxonomy))
    max_span = max(v.length for v in videos) - 1
    n = int(rng.integers(1, 4))
    spans = sorted(int(s) for s in rng.choice(
        np.arange(0, max(1, max_span) + 1), size=min(n, max_span + 1), replace=False))
    config = VpqConfig(window_spans=tuple(spans) or (0,), annotation_stride=stride)
    return taxonomy, videos, preds, config


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--videos", type=int, default=100)
    parser.add_argument("--start-seed", type=int, default=0)
    args = parser.parse_args()

    done = 0
    seed = args.start_seed
    start = time.monotonic()
    while done < args.videos:
        taxonomy, videos, preds, config = random_dataset(seed)
        engine = evaluate_videos(list(zip(videos, preds)), taxonomy, config)
        oracle = sim.oracle_vpq(videos, preds, taxonomy, config)
        if engine != oracle:
            raise SystemExit(f"MISMATCH at seed {seed}: {engine} vs {oracle}")
        done += len(videos)
        seed += 1
    elapsed = time.monotonic() - start
    print(f"oracle == engine on {done} videos ({seed - args.start_seed} datasets) "
          f"in {elapsed:.1f}s")


if __name__ == "__main__":
    main()
