"""How the teacher turns embeddings into soft labels and cross-modal triplets.

Each audio embedding gets a softmax distribution over the visual rows of its
batch (and vice versa). Two positions count as a positive pair when their
distributions point at each other's argmax; every other pair is negative, so
the two masks always partition the grid. The labeled fraction of each batch
follows a ratio schedule that decays as training progresses.

Run from the repository root:

    python3 demos/02_soft_alignment_tour.py
"""

import numpy as np

from avdistill import (
    EmbeddingBatch,
    RatioSchedule,
    label_masks,
    one_hot,
    partition_batch,
    soft_alignment,
)

rng = np.random.default_rng(5)
emb = EmbeddingBatch(rng.standard_normal((4, 3)), rng.standard_normal((4, 3)))
align = soft_alignment(emb, temperature=0.5)

print("audio -> visual alignment (rows sum to 1):")
for i, row in enumerate(align.audio_align):
    print(f"  audio {i}: " + " ".join(f"{p:.3f}" for p in row))
print("row sums:", np.round(align.audio_align.sum(axis=1), 12).tolist())

print("\npositive mask (True = treated as a matching pair):")
print(align.positive_mask.astype(int))
# The two masks cover every cell exactly once.
assert (align.positive_mask ^ align.negative_mask).all()

# With exact one-hot class codes the discovered pairs equal the label pairs.
labels = np.array([0, 1, 1, 0])
codes = one_hot(labels, 2).astype(float)
discovered = soft_alignment(EmbeddingBatch(codes.copy(), codes.copy()))
expected_pos, _ = label_masks(labels)
assert np.array_equal(discovered.positive_mask, expected_pos)
print("\none-hot embeddings recover the label mask exactly")

sched = RatioSchedule(kind="step", start=1.0, end=0.2, total_epochs=10, steps=5)
print("\nstep schedule over 10 epochs:",
      [sched.at(e) for e in range(10)])

# At ratio 0.6 a 10-row batch keeps 6 labeled rows and frees 4 for the teacher.
plan = partition_batch(10, sched.at(4), [0, 201])
print(f"epoch 4 partition: {len(plan.labeled_idx)} labeled rows "
      f"{plan.labeled_idx.tolist()}, {len(plan.soft_idx)} soft rows "
      f"{plan.soft_idx.tolist()}")
