"""Identification and verification evaluation over gallery/probe protocols.

Matching uses the plain (non-squared) Euclidean distance; since training
distances are squared, rankings are identical either way (the square root
is monotone).  Galleries are sequences of ``(subject_id, embedding)``
pairs; when a subject has several gallery images its distance to a probe
is the minimum over them.

Deterministic tie/ordering contracts (tests hold independent
implementations to them bit-exactly):

* :func:`identify` sorts subjects by (distance, subject_id) ascending;
* CMC values and accept rates are plain ``count / n`` fractions;
* :func:`gar_at_far` thresholds come from the observed score grid (the
  union of genuine and imposter scores) - the largest grid value whose
  empirical FAR does not exceed the target, with no interpolation; if even
  the smallest score overshoots the target, the reported operating point
  accepts nothing (FAR 0, GAR 0);
* :func:`mean_inter_class_distance` accumulates left to right over gallery
  entries (outer) and probes (inner), skipping same-subject pairs, then
  divides once by the pair count;
* aggregate mean and std (population, ddof 0) are computed by the same
  sequential-sum rule.

:func:`repeated_evaluation` runs the full protocol: per repetition a
subject-disjoint 70/30 split, training on the train side, then
identification (single-image gallery), verification on balanced sampled
pairs, and the inter-class separation statistic on the test side.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import mining, model, training
from .dataset import Dataset, GalleryProbePartition, Sample, SplitSpec, Subclass, gallery_probe_partition, subject_split
from .errors import DataError, ProtocolError
from .losses import euclidean_distance, squared_euclidean


@dataclass(frozen=True)
class CmcCurve:
    """Cumulative match rates by rank; ``values[k-1]`` is rank-k accuracy."""

    values: tuple[float, ...]
    n_unenrolled: int = 0

    def __post_init__(self):
        if not self.values:
            raise ProtocolError("CMC curve needs at least rank 1")


@dataclass(frozen=True)
class GarFarEntry:
    target_far: float
    achieved_far: float
    gar: float
    threshold: float


@dataclass(frozen=True)
class VerificationReport:
    genuine_scores: tuple[float, ...]
    imposter_scores: tuple[float, ...]
    gar_at_far: tuple[GarFarEntry, ...] = field(default=())


@dataclass(frozen=True)
class RepetitionResult:
    repetition: int
    rank_accuracies: dict
    cmc: CmcCurve
    verification: VerificationReport
    mean_inter_class_distance: float
    gallery_size: int
    n_probes: int


@dataclass(frozen=True)
class EvalReport:
    """Per-repetition results plus mean/std aggregation and protocol flags."""

    repetitions: tuple[RepetitionResult, ...]
    ranks: tuple[int, ...]
    rank_mean: dict
    rank_std: dict
    mean_cmc: tuple[float, ...]
    gar_mean: dict
    inter_class_mean: float
    extended_gallery: bool
    normalized: bool


def extract_embeddings(m: model.ModelParams, samples) -> list[np.ndarray]:
    """Map samples through the network, preserving order."""
    return [model.forward(m, s.embedding)[0] for s in samples]


def _normalize_rows(vectors) -> list[np.ndarray]:
    out = []
    for v in vectors:
        norm = math.sqrt(squared_euclidean(v, np.zeros_like(v)))
        out.append(v / norm if norm > 0.0 else v)
    return out


def identify(probe_embedding, gallery) -> list[int]:
    """Rank gallery subjects by ascending distance to the probe.

    ``gallery`` is a sequence of (subject_id, embedding); multiple entries
    per subject are reduced by minimum distance.  Ties break by ascending
    subject_id, so the result is a deterministic permutation of the
    distinct gallery subject ids.
    """
    if not gallery:
        raise ProtocolError("identify needs a nonempty gallery")
    best: dict[int, float] = {}
    for subject_id, emb in gallery:
        d = euclidean_distance(probe_embedding, emb)
        if subject_id not in best or d < best[subject_id]:
            best[subject_id] = d
    return [sid for sid, _ in sorted(best.items(), key=lambda kv: (kv[1], kv[0]))]


def cmc_curve(rankings) -> CmcCurve:
    """Fraction of probes whose true subject appears within each rank.

    ``rankings`` pairs each probe's true subject with its ranked id list;
    all lists must cover the same gallery.  Probes whose subject is not
    enrolled count as never matched and are tallied in ``n_unenrolled``.
    """
    rankings = list(rankings)
    if not rankings:
        raise ProtocolError("cmc_curve needs at least one probe ranking")
    gallery_size = len(rankings[0][1])
    hits = [0] * gallery_size
    unenrolled = 0
    for true_subject, ranked in rankings:
        if len(ranked) != gallery_size:
            raise ProtocolError("ranked lists cover differently sized galleries")
        if true_subject in ranked:
            hits[ranked.index(true_subject)] += 1
        else:
            unenrolled += 1
    n = len(rankings)
    values = []
    cum = 0
    for k in range(gallery_size):
        cum += hits[k]
        values.append(cum / n)
    return CmcCurve(tuple(values), unenrolled)


def rank_k_accuracy(curve: CmcCurve, k: int) -> float:
    if not 1 <= k <= len(curve.values):
        raise ProtocolError(f"rank {k} outside 1..{len(curve.values)}")
    return curve.values[k - 1]


def verification_scores(pairs, m: model.ModelParams) -> VerificationReport:
    """Distance per pair, partitioned by label into genuine/imposter scores."""
    pairs = list(pairs)
    if not pairs:
        raise ProtocolError("verification needs at least one pair")
    genuine = []
    imposter = []
    for pair in pairs:
        e1, _ = model.forward(m, pair.first.embedding)
        e2, _ = model.forward(m, pair.second.embedding)
        d = euclidean_distance(e1, e2)
        (genuine if pair.label == 0 else imposter).append(d)
    return VerificationReport(tuple(genuine), tuple(imposter))


def _far(imposter, threshold: float) -> float:
    return sum(1 for s in imposter if s <= threshold) / len(imposter)


def _gar(genuine, threshold: float) -> float:
    return sum(1 for s in genuine if s <= threshold) / len(genuine)


def gar_at_far(report: VerificationReport, target_fars) -> VerificationReport:
    """Fill the GAR@FAR table at the requested target rates.

    Acceptance rule: distance <= threshold.  For each target the threshold
    is the largest observed score whose empirical FAR stays within the
    target (conservative, no interpolation); the achieved FAR is reported
    alongside.
    """
    if not report.genuine_scores or not report.imposter_scores:
        raise ProtocolError("gar_at_far needs both genuine and imposter scores")
    grid = sorted(set(report.genuine_scores) | set(report.imposter_scores))
    entries = []
    for target in target_fars:
        if not 0.0 < target <= 1.0:
            raise ProtocolError(f"target FAR must be in (0, 1], got {target}")
        chosen = None
        for t in grid:
            if _far(report.imposter_scores, t) <= target:
                chosen = t
            else:
                break
        if chosen is None:
            threshold = math.nextafter(grid[0], -math.inf)
            entries.append(GarFarEntry(target, 0.0, 0.0, threshold))
        else:
            entries.append(
                GarFarEntry(
                    target,
                    _far(report.imposter_scores, chosen),
                    _gar(report.genuine_scores, chosen),
                    chosen,
                )
            )
    return replace(report, gar_at_far=tuple(entries))


def far_gar_sweep(report: VerificationReport):
    """(threshold, far, gar) at every observed score, for curve export."""
    grid = sorted(set(report.genuine_scores) | set(report.imposter_scores))
    return [(t, _far(report.imposter_scores, t), _gar(report.genuine_scores, t)) for t in grid]


def mean_inter_class_distance(gallery, probes, m: model.ModelParams, normalize: bool) -> float:
    """Mean distance between each subject's gallery entries and all other
    subjects' probes.

    ``gallery`` and ``probes`` are (subject_id, embedding) sequences; all
    embeddings are mapped through the model, optionally unit-normalized,
    and the mean runs over cross-subject pairs in (gallery, probe) order.
    """
    gallery = list(gallery)
    probes = list(probes)
    g_emb = [model.forward(m, emb)[0] for _, emb in gallery]
    p_emb = [model.forward(m, emb)[0] for _, emb in probes]
    if normalize:
        g_emb = _normalize_rows(g_emb)
        p_emb = _normalize_rows(p_emb)
    total = 0.0
    count = 0
    for (g_sid, _), ge in zip(gallery, g_emb):
        for (p_sid, _), pe in zip(probes, p_emb):
            if g_sid != p_sid:
                total += euclidean_distance(ge, pe)
                count += 1
    if count == 0:
        raise ProtocolError("inter-class distance needs at least 2 subjects")
    return total / count


def extend_gallery(partition: GalleryProbePartition, distractors) -> GalleryProbePartition:
    """Merge distractor subjects (one image each) into the gallery.

    ``distractors`` is a sequence of (subject_id, embedding) whose ids must
    not collide with any subject already in the partition; probes are left
    untouched.
    """
    existing = {s.subject_id for s in partition.gallery} | {s.subject_id for s in partition.probe}
    extra = []
    for subject_id, emb in distractors:
        if subject_id in existing:
            raise DataError(f"distractor subject id {subject_id} collides with the partition")
        existing.add(subject_id)
        extra.append(Sample(subject_id, Subclass.NON_INJURED, 0, emb))
    return replace(partition, gallery=partition.gallery + tuple(extra))


def _sequential_mean(values) -> float:
    total = 0.0
    for v in values:
        total += v
    return total / len(values)


def _sequential_std(values) -> float:
    mean = _sequential_mean(values)
    total = 0.0
    for v in values:
        total += (v - mean) ** 2
    return math.sqrt(total / len(values))


def sample_verification_pairs(ds: Dataset, n_per_label: int, seed: int):
    """Uniformly sample a balanced verification pair list (n genuine +
    n imposter), mining with replacement so small test sets still fill up."""
    if n_per_label < 1:
        raise ProtocolError("need at least one verification pair per label")
    eligible = sum(1 for r in ds.subjects if r.non_injured and r.injured)
    if eligible == 0:
        raise ProtocolError("no subject has both subclasses; cannot build pairs")
    per_subject = -(-n_per_label // eligible)  # ceil
    pairs = mining.build_cl_pairs(ds, per_subject, seed)
    genuine = [p for p in pairs if p.label == 0][:n_per_label]
    imposter = [p for p in pairs if p.label == 1][:n_per_label]
    return genuine + imposter


def evaluate_model(
    params: model.ModelParams,
    test_ds: Dataset,
    *,
    repetition: int = 0,
    ranks=(1, 5, 10),
    target_fars=(0.01, 0.1),
    normalize: bool = True,
    verification_pairs: int = 50,
    distractors=None,
    pair_seed: int = 0,
) -> RepetitionResult:
    """Single-split evaluation of a fixed model on a test dataset.

    Identification uses a single-image gallery (optionally extended with
    distractors); requested ranks beyond the gallery size are dropped.  The
    inter-class statistic is computed on the unextended gallery so that it
    stays comparable across runs.
    """
    part = gallery_probe_partition(test_ds, single_image_gallery=True)
    base_gallery = [(s.subject_id, s.embedding) for s in part.gallery]
    eval_part = extend_gallery(part, distractors) if distractors else part
    gallery_inputs = [(s.subject_id, s.embedding) for s in eval_part.gallery]

    gallery_emb = [
        (sid, model.forward(params, emb)[0]) for sid, emb in gallery_inputs
    ]
    rankings = []
    for probe in eval_part.probe:
        probe_emb, _ = model.forward(params, probe.embedding)
        rankings.append((probe.subject_id, identify(probe_emb, gallery_emb)))
    curve = cmc_curve(rankings)
    usable_ranks = tuple(k for k in ranks if 1 <= k <= len(curve.values))
    accuracies = {k: rank_k_accuracy(curve, k) for k in usable_ranks}

    pairs = sample_verification_pairs(test_ds, verification_pairs, pair_seed)
    verification = gar_at_far(verification_scores(pairs, params), target_fars)

    probe_inputs = [(s.subject_id, s.embedding) for s in part.probe]
    icd = mean_inter_class_distance(base_gallery, probe_inputs, params, normalize)

    return RepetitionResult(
        repetition=repetition,
        rank_accuracies=accuracies,
        cmc=curve,
        verification=verification,
        mean_inter_class_distance=icd,
        gallery_size=len(curve.values),
        n_probes=len(rankings),
    )


def aggregate_results(
    results,
    ranks,
    *,
    extended_gallery: bool = False,
    normalized: bool = True,
) -> EvalReport:
    """Mean/std aggregation of repetition results (population std, ddof 0)."""
    results = tuple(results)
    if not results:
        raise ProtocolError("nothing to aggregate")
    usable_ranks = tuple(k for k in ranks if all(k in r.rank_accuracies for r in results))
    rank_mean = {k: _sequential_mean([r.rank_accuracies[k] for r in results]) for k in usable_ranks}
    rank_std = {k: _sequential_std([r.rank_accuracies[k] for r in results]) for k in usable_ranks}
    min_len = min(len(r.cmc.values) for r in results)
    mean_cmc = tuple(
        _sequential_mean([r.cmc.values[k] for r in results]) for k in range(min_len)
    )
    targets = [e.target_far for e in results[0].verification.gar_at_far]
    gar_mean = {
        t: _sequential_mean(
            [r.verification.gar_at_far[i].gar for r in results]
        )
        for i, t in enumerate(targets)
    }
    icd_mean = _sequential_mean([r.mean_inter_class_distance for r in results])
    return EvalReport(
        repetitions=results,
        ranks=usable_ranks,
        rank_mean=rank_mean,
        rank_std=rank_std,
        mean_cmc=mean_cmc,
        gar_mean=gar_mean,
        inter_class_mean=icd_mean,
        extended_gallery=extended_gallery,
        normalized=normalized,
    )


def repeated_evaluation(
    ds: Dataset,
    split: SplitSpec,
    train_cfg: training.TrainConfig,
    *,
    ranks=(1, 5, 10),
    target_fars=(0.01, 0.1),
    normalize: bool = True,
    verification_pairs: int = 50,
    distractors=None,
) -> EvalReport:
    """The repeated random sub-sampling protocol, end to end.

    For each repetition: subject-disjoint split, train on the train side
    (seed mixed with the repetition index), evaluate on the test side's
    single-image gallery and injured probes.  Reports mean and population
    std over exactly ``split.repetitions`` repetitions.
    """
    results = []
    for rep in range(split.repetitions):
        train_ds, test_ds = subject_split(ds, split, rep)
        cfg_rep = training.config_for_repetition(train_cfg, rep)
        params, _ = training.train(train_ds, cfg_rep)
        results.append(
            evaluate_model(
                params,
                test_ds,
                repetition=rep,
                ranks=ranks,
                target_fars=target_fars,
                normalize=normalize,
                verification_pairs=verification_pairs,
                distractors=distractors,
                pair_seed=training.derive_seed(split.seed, rep, 7),
            )
        )
    return aggregate_results(
        results, ranks, extended_gallery=distractors is not None, normalized=normalize
    )
