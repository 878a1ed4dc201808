#!/usr/bin/env python3
"""Regenerates the 6-image smoke fixture (3 synthetic/real pairs).

Features are 8-d stand-ins for encoder activations: a domain offset plus
seeded Gaussian noise. Labels follow the bundled ontology so that every
synthetic image needs a multi-step plan to reach its real counterpart.
"""
import json
import random
from pathlib import Path

HERE = Path(__file__).resolve().parent
DIM = 8

# trait -> (synthetic values, real values); None is a masked label
LABELS = {
    "lighting.uniform": ([1, 1, 1], [0, 0, 0]),
    "shadows.present": ([0, 0, 0], [1, 1, 1]),
    "scene.object_interaction": ([0, 0, 0], [1, 1, 1]),
    "optical.chromatic_aberration": ([0, 0, 0], [1, 0, 1]),
    "edge.perfect_geometry": ([1, 1, 1], [0, 0, 0]),
    "optical.blur": ([0, 0, 0], [1, 1, 1]),
    "optical.noise_present": ([0, 0, 0], [1, 1, 1]),
    "optical.compression_artifacts": ([0, 0, 0], [1, 0, 1]),
    "edge.lens_distortion": ([0, 0, 0], [1, 1, 1]),
    "optical.vignetting": ([0, 0, 0], [1, 1, 0]),
    "optical.lens_flare": ([1, 0, None], [0, 0, 0]),
    "scene.environmental_integration": ([0, 0, 0], [1, 1, 1]),
    "color.oversaturation": ([1, 1, 0], [0, 0, 0]),
    "scene.realistic_scatter": ([0, 0, 0], [1, 1, 1]),
}


def main():
    rng = random.Random(20240611)
    features, labels, entries = [], {}, []
    for k in range(3):
        syn, real = f"syn_{k:02d}", f"real_{k:02d}"
        for image_id, domain, pair, side in ((syn, "synthetic", real, 0), (real, "real", syn, 1)):
            offset = -1.0 if side == 0 else 1.0
            vec = [round(offset * (1.0 if d % 2 == 0 else 0.5) + rng.gauss(0.0, 0.6), 6) for d in range(DIM)]
            features.append({"image_id": image_id, "features": vec, "domain_label": domain})
            labels[image_id] = {t: v[side][k] for t, v in LABELS.items()}
            entries.append({
                "image_id": image_id,
                "feature_path": "features.jsonl",
                "labels_ref": "labels.json",
                "domain_label": domain,
                "pair_id": pair,
            })
    with open(HERE / "features.jsonl", "w") as f:
        for rec in features:
            f.write(json.dumps(rec) + "\n")
    with open(HERE / "labels.json", "w") as f:
        json.dump(labels, f, indent=2)
        f.write("\n")
    with open(HERE / "manifest.json", "w") as f:
        json.dump({"entries": entries}, f, indent=2)
        f.write("\n")


if __name__ == "__main__":
    main()
