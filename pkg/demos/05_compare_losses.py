"""Side-by-side comparison of the three losses under the repeated protocol.

Every loss is trained and evaluated under identical subject-disjoint
splits, seeds, and step budgets on the hard synthetic preset (three injury
directions per subject, injured spread three times the intact spread).

Two things to notice in the output:

* the subclass-aware loss raises the normalized inter-class separation of
  the embedding relative to its untrained starting point (that, plus a
  rank-1 edge over plain contrastive training on most single-split seeds,
  is what the acceptance suite pins down);
* per-split rank-1 numbers overlap between losses - small galleries make
  these comparisons noisy, so treat any single cell as a sample, not a
  verdict.  The triplet baseline is strong here: its margin is relative to
  the genuine distance and therefore scale-free, while the two contrastive
  losses use absolute margins.

This is the library-level equivalent of ``sclmetric compare``.
"""

from sclmetric import SplitSpec, generate_synthetic, repeated_evaluation
from sclmetric.presets import hard_synth_config, synthetic_regime

ds = generate_synthetic(hard_synth_config(seed=0))
split = SplitSpec(seed=0, repetitions=3)
ranks = (1, 5)

rows = {}
for loss in ("cl", "tl", "scl"):
    report = repeated_evaluation(
        ds, split, synthetic_regime(loss, seed=0), ranks=ranks, verification_pairs=50
    )
    rows[loss] = report
    print(f"{loss} done ({split.repetitions} train+eval repetitions)")

print(f"\n{'loss':>5} | " + " | ".join(f"rank-{k} mean+-std" for k in ranks) + " | GAR@0.1FAR | inter-class")
for loss, report in rows.items():
    cells = " | ".join(
        f"{report.rank_mean[k]:.3f}+-{report.rank_std[k]:.3f}" for k in report.ranks
    )
    print(
        f"{loss.upper():>5} | {cells} | {report.gar_mean[0.1]:>10.3f} | {report.inter_class_mean:>11.3f}"
    )

print("\nper-repetition rank-1 (cl vs scl):")
for rep in range(split.repetitions):
    cl_r1 = rows["cl"].repetitions[rep].rank_accuracies[1]
    scl_r1 = rows["scl"].repetitions[rep].rank_accuracies[1]
    print(f"  split {rep}: cl {cl_r1:.3f}  scl {scl_r1:.3f}")
