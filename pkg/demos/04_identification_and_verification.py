"""The full evaluation protocol on one held-out split.

Identification: every injured probe is ranked against a single-image intact
gallery by Euclidean distance; the CMC curve summarizes the ranks.
Verification: balanced genuine/imposter pairs are thresholded on distance
to report GAR at target FAR operating points.  An extended gallery with
100 distractor subjects emulates large-scale matching.
"""

from dataclasses import replace

from sclmetric import SplitSpec, evaluate_model, generate_synthetic, subject_split, train
from sclmetric.presets import easy_synth_config, synthetic_regime

ds = generate_synthetic(easy_synth_config(seed=1))
train_ds, test_ds = subject_split(ds, SplitSpec(seed=1), repetition=0)
params, _ = train(train_ds, synthetic_regime(seed=1, epochs=60))

result = evaluate_model(params, test_ds, ranks=(1, 2, 3), verification_pairs=50)
print(f"gallery: {result.gallery_size} subjects (single image each), probes: {result.n_probes}")
print("CMC curve:", [round(v, 3) for v in result.cmc.values])
for k, acc in result.rank_accuracies.items():
    print(f"  rank-{k} accuracy: {acc:.3f}")

print("\nverification (50 genuine + 50 imposter pairs):")
for entry in result.verification.gar_at_far:
    print(
        f"  target FAR {entry.target_far:>5}: GAR {entry.gar:.2f} "
        f"at threshold {entry.threshold:.4f} (achieved FAR {entry.achieved_far:.3f})"
    )
print(f"normalized mean inter-class distance: {result.mean_inter_class_distance:.3f}")

# extended gallery: 100 held-out distractor subjects, one image each
distract_ds = generate_synthetic(replace(easy_synth_config(seed=9001), n_subjects=100, n_injured=1))
distractors = [(10_000 + r.subject_id, r.non_injured[0].embedding) for r in distract_ds.subjects]
extended = evaluate_model(params, test_ds, ranks=(1,), verification_pairs=50, distractors=distractors)
print(
    f"\nextended gallery: {extended.gallery_size} subjects; "
    f"rank-1 {result.rank_accuracies[1]:.3f} -> {extended.rank_accuracies[1]:.3f}"
)
