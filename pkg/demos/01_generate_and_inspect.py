"""Generate a paired audio/visual dataset and poke at both file formats.

The generator draws one centroid per class in each modality and scatters
pairs around them, so low noise gives cleanly separable clusters. Features
pass through float32 on the way out, which is why the binary file and the
CSV file reload to bit-identical arrays.

Run from the repository root:

    python3 demos/01_generate_and_inspect.py
"""

import struct
import tempfile
from pathlib import Path

import numpy as np

from avdistill import SyntheticSpec, generate_synthetic, load_features, save_features

spec = SyntheticSpec(
    n_classes=4,
    pairs_per_class=6,
    audio_dim=8,
    visual_dim=12,
    noise_scale=0.05,
    seed=123,
)
meta, data = generate_synthetic(spec)

print(f"generated {meta.n_pairs} pairs, {meta.n_classes} classes")
print(f"audio block  : {data.audio.shape}, dtype {data.audio.dtype}")
print(f"visual block : {data.visual.shape}")
print(f"labels       : {data.labels.tolist()}")

# Same-class rows sit near a shared centroid; check one split of distances.
same = np.linalg.norm(data.audio[0] - data.audio[1])
other = np.linalg.norm(data.audio[0] - data.audio[6])
print(f"\nwithin-class audio distance : {same:.4f}")
print(f"across-class audio distance : {other:.4f}")

with tempfile.TemporaryDirectory() as tmp:
    binary_path = Path(tmp) / "pairs.avfd"
    csv_path = Path(tmp) / "pairs.csv"
    save_features(binary_path, meta, data)
    save_features(csv_path, meta, data)

    raw = binary_path.read_bytes()
    magic, version, n, ad, vd, nc = struct.unpack("<4sHIIII", raw[:22])
    print(f"\nbinary header: magic={magic!r} version={version} "
          f"n={n} audio_dim={ad} visual_dim={vd} classes={nc}")
    record = (ad + vd) * 4 + 4
    print(f"record size  : {record} bytes, file total {len(raw)} bytes")

    first_line = csv_path.read_text().splitlines()[0]
    print(f"csv header   : {first_line[:60]}...")

    for path in (binary_path, csv_path):
        meta2, data2 = load_features(path)
        assert np.array_equal(data.audio, data2.audio)
        assert np.array_equal(data.visual, data2.visual)
        assert np.array_equal(data.labels, data2.labels)
        print(f"roundtrip ok : {path.suffix}")
