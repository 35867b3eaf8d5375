"""Command-line entry points.

Subcommands: ``extract`` (transcripts -> pairs), ``train`` (pairs +
features -> checkpoint), ``eval`` (checkpoint + features -> metrics),
``synth`` (planted corpora), ``gradcheck`` (finite-difference audit).

Exit codes: 0 success, 1 a requested check failed, 2 bad usage or bad
input files, 3 numeric failure (non-finite values).  Every run that writes
an artifact also writes a ``*.manifest.json`` recording the subcommand,
resolved parameters, sha256 of each input file, seed, package version, and
wall-clock duration.  ``--seed`` falls back to the GROUNDKIT_SEED
environment variable, then 0.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .dataset import (
    DatasetError,
    extract_entity_pairs,
    format_summary,
    load_irregular_lexicon,
    video_multilabels,
)
from .grounding import (
    GroundingConfig,
    GroundingError,
    MilModel,
    ReconModel,
    ground,
    grounding_accuracy,
    mil_loss,
    MilItem,
    random_baseline,
    recon_loss,
    train_mil,
    train_recon,
    upper_bound,
)
from .ingest import (
    IngestError,
    MissingWordError,
    parse_ctm,
    parse_embeddings,
    parse_vocabulary,
    read_frame_vectors,
    read_gold,
    read_pairs,
    read_proposal_frames,
    write_embeddings,
    write_frame_vectors,
    write_gold,
    write_pairs,
    write_proposal_frames,
    write_vocabulary,
)
from .nn import (
    LinearLayer,
    NumericsError,
    binary_cross_entropy,
    cross_entropy,
    finite_diff_check,
    linear_backward,
    linear_forward,
    load_checkpoint,
    make_rng,
    mean_squared_error,
)
from .recognition import (
    ClassifierModel,
    RecognitionConfig,
    RecognitionError,
    average_precision_at_k,
    map_at_k,
    rank_frames,
    top_k_accuracy,
    train_classifier,
)
from .synth import SynthError, SynthSpec, gen_classification_corpus, gen_grounding_corpus

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_NUMERIC = 3

CLS_LR = 1e-4
GRADCHECK_TOLERANCE = 1e-4
GRADCHECK_TOLERANCE_LINEAR = 1e-6

_USAGE_ERRORS = (
    IngestError,
    DatasetError,
    RecognitionError,
    GroundingError,
    SynthError,
    MissingWordError,
    ValueError,
    OSError,
)


class CliError(Exception):
    """Bad flag combination or unusable input; maps to exit code 2."""


@dataclass
class RunManifest:
    """Provenance record written next to every artifact."""

    subcommand: str
    params: dict
    inputs: dict[str, str]
    seed: int
    version: str
    duration_s: float


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_manifest(path, subcommand: str, params: dict, inputs, seed: int, started: float) -> None:
    manifest = RunManifest(
        subcommand=subcommand,
        params=params,
        inputs={str(p): _sha256(p) for p in inputs},
        seed=seed,
        version=__version__,
        duration_s=round(time.monotonic() - started, 3),
    )
    Path(path).write_text(json.dumps(asdict(manifest), indent=2, sort_keys=True) + "\n")


def _resolve_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    raw = os.environ.get("GROUNDKIT_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise CliError(f"GROUNDKIT_SEED must be an integer, got {raw!r}") from None


def _int_list(raw: str) -> list[int]:
    try:
        values = [int(v) for v in raw.split(",") if v.strip()]
    except ValueError:
        raise CliError(f"expected comma-separated integers, got {raw!r}") from None
    if not values:
        raise CliError(f"expected comma-separated integers, got {raw!r}")
    return values


def _float_args(raw: str) -> list[float]:
    try:
        values = [float(v) for v in raw.split(",") if v.strip()]
    except ValueError:
        raise CliError(f"expected comma-separated numbers, got {raw!r}") from None
    if not values:
        raise CliError(f"expected comma-separated numbers, got {raw!r}")
    return values


# ---------------------------------------------------------------------------
# extract


def cmd_extract(args) -> int:
    started = time.monotonic()
    seed = _resolve_seed(args)
    grouped: dict[str, list] = {}
    for ctm_path in args.ctm:
        try:
            tokens = parse_ctm(ctm_path)
        except IngestError as exc:
            raise CliError(f"{ctm_path}: {exc}") from None
        for tok in tokens:
            grouped.setdefault(tok.utterance_id, []).append(tok)
    vocab = parse_vocabulary(args.vocab)
    irregular = load_irregular_lexicon(args.irregular) if args.irregular else None
    pairs, summary = extract_entity_pairs(
        grouped,
        vocab,
        min_count=args.min_count,
        merge_plural=args.merge_plural,
        irregular=irregular,
    )
    write_pairs(pairs, args.out)
    text = format_summary(summary)
    Path(str(args.out) + ".summary.txt").write_text(text)
    sys.stdout.write(text)
    print(f"wrote {len(pairs)} pairs to {args.out}")
    inputs = list(args.ctm) + [args.vocab] + ([args.irregular] if args.irregular else [])
    _write_manifest(
        str(args.out) + ".manifest.json",
        "extract",
        {
            "min_count": args.min_count,
            "merge_plural": args.merge_plural,
            "out": str(args.out),
        },
        inputs,
        seed,
        started,
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# train


def _attach_entities(frames, pairs):
    if pairs is None:
        return
    by_frame = {}
    for pair in pairs:
        by_frame.setdefault(pair.frame_id, pair.entity)
    for frame in frames:
        if frame.entity is None and frame.frame_id in by_frame:
            frame.entity = by_frame[frame.frame_id]


def cmd_train(args) -> int:
    started = time.monotonic()
    seed = _resolve_seed(args)
    task = args.task
    pairs = read_pairs(args.pairs) if args.pairs else None
    inputs = [args.features] + ([args.pairs] if args.pairs else [])
    params: dict = {
        "task": task,
        "epochs": args.epochs,
        "batch_size": args.batch_size,
        "seed": seed,
        "out": str(args.out),
    }

    if task in ("cls-single", "cls-multi"):
        frames = read_frame_vectors(args.features)
        _attach_entities(frames, pairs)
        mode = "single" if task == "cls-single" else "multi"
        lr = args.lr if args.lr is not None else CLS_LR
        cfg = RecognitionConfig(
            lr=lr,
            batch_size=args.batch_size,
            epochs=args.epochs,
            hidden=args.hidden if args.hidden is not None else 256,
            dropout=args.dropout if args.dropout is not None else 0.5,
            seed=seed,
        )
        video_labels = None
        class_index = None
        if mode == "multi":
            if pairs is None:
                raise CliError("cls-multi needs --pairs to build per-video label sets")
            video_labels = video_multilabels(pairs)
        if pairs is not None:
            class_index = sorted({p.entity for p in pairs})
        model, trace = train_classifier(
            frames, cfg, mode=mode, video_labels=video_labels, class_index=class_index
        )
        params.update({"lr": lr, "hidden": cfg.hidden, "dropout": cfg.dropout, "mode": mode})
    elif task in ("mil", "recon"):
        if not args.embeddings:
            raise CliError(f"{task} training needs --embeddings")
        frames = read_proposal_frames(args.features)
        embeddings = parse_embeddings(args.embeddings)
        inputs.append(args.embeddings)
        cfg = GroundingConfig(
            lr=args.lr,
            delta=args.delta,
            batch_size=args.batch_size,
            epochs=args.epochs,
            hidden=args.hidden if args.hidden is not None else 512,
            joint_dim=args.joint_dim,
            dropout=args.dropout if args.dropout is not None else 0.2,
            seed=seed,
            freeze_target=args.freeze_target,
        )
        if task == "mil":
            model, trace = train_mil(frames, embeddings, cfg, pairs=pairs)
            resolved_lr = cfg.lr if cfg.lr is not None else 1e-5
            params.update(
                {
                    "lr": resolved_lr,
                    "delta": cfg.delta,
                    "hidden": cfg.hidden,
                    "joint_dim": cfg.joint_dim,
                    "dropout": cfg.dropout,
                }
            )
        else:
            model, trace = train_recon(frames, embeddings, cfg, pairs=pairs)
            resolved_lr = cfg.lr if cfg.lr is not None else 1e-3
            params.update(
                {
                    "lr": resolved_lr,
                    "joint_dim": cfg.joint_dim,
                    "freeze_target": cfg.freeze_target,
                }
            )
    else:
        raise CliError(f"unknown task {task!r}")

    model.save(args.out)
    with open(str(args.out) + ".trace.jsonl", "w", encoding="utf-8") as handle:
        for epoch, loss in enumerate(trace):
            handle.write(json.dumps({"epoch": epoch, "loss": loss}) + "\n")
    print(f"trained {task} for {len(trace)} epochs; final loss {trace[-1]:.6f}")
    print(f"checkpoint: {args.out}")
    _write_manifest(str(args.out) + ".manifest.json", "train", params, inputs, seed, started)
    return EXIT_OK


# ---------------------------------------------------------------------------
# eval


def _format_table(col_names: list[str], rows: list[tuple[str, list[str]]]) -> str:
    label_width = max(len(label) for label, _ in rows)
    widths = [
        max(len(name), max(len(cells[i]) for _, cells in rows)) for i, name in enumerate(col_names)
    ]
    lines = [
        " " * label_width
        + "  "
        + "  ".join(name.rjust(widths[i]) for i, name in enumerate(col_names))
    ]
    for label, cells in rows:
        lines.append(
            label.ljust(label_width)
            + "  "
            + "  ".join(cells[i].rjust(widths[i]) for i in range(len(col_names)))
        )
    return "\n".join(lines)


def _eval_cls(args, seed: int) -> tuple[str, list[dict], list]:
    model = ClassifierModel.load(args.checkpoint)
    frames = read_frame_vectors(args.features)
    if not frames:
        raise CliError("no frames to evaluate")
    ks = _int_list(args.topk)
    gold_single: dict[str, str] = {}
    gold_sets: dict[str, set[str]] = {}
    if args.gold:
        for record in read_gold(args.gold):
            gold_single[record.frame_id] = record.entity
            gold_sets.setdefault(record.frame_id, set()).add(record.entity)
    else:
        for frame in frames:
            if frame.entity is None:
                raise CliError(
                    f"frame {frame.frame_id!r} has no entity label; supply --gold"
                )
            gold_single[frame.frame_id] = frame.entity
            gold_sets[frame.frame_id] = {frame.entity}
    ranked = rank_frames(model, frames, max(ks))

    records: list[dict] = []
    acc_cells: list[str] = []
    map_cells: list[str] = []
    for k in ks:
        accuracy = top_k_accuracy(ranked, gold_single, k)
        ap_values = []
        for frame_id in ranked:
            if frame_id not in gold_sets:
                raise RecognitionError(f"no gold label for frame {frame_id!r}")
            ap_values.append(average_precision_at_k(ranked[frame_id], gold_sets[frame_id], k))
        mean_ap = map_at_k(ap_values)
        acc_cells.append(f"{accuracy:.2f}")
        map_cells.append(f"{mean_ap:.4f}")
        records.append({"metric": "top_k_accuracy", "k": k, "value": accuracy})
        records.append({"metric": "map", "k": k, "value": mean_ap})
    table = _format_table(
        [f"top-{k}" for k in ks], [("accuracy", acc_cells), ("map", map_cells)]
    )
    text = f"recognition metrics ({model.mode} mode, {len(frames)} frames)\n{table}\n"
    inputs = [args.checkpoint, args.features] + ([args.gold] if args.gold else [])
    return text, records, inputs


def _load_grounder(path):
    meta, _ = load_checkpoint(path)
    kind = meta.get("model")
    if kind == "mil":
        return MilModel.load(path), "mil"
    if kind == "recon":
        return ReconModel.load(path), "recon"
    raise CliError(f"checkpoint {path} holds a {kind!r} model; expected mil or recon")


def _eval_ground(args, seed: int) -> tuple[str, list[dict], list]:
    if not args.gold:
        raise CliError("grounding evaluation needs --gold")
    if not args.embeddings:
        raise CliError("grounding evaluation needs --embeddings")
    model, kind = _load_grounder(args.checkpoint)
    frames = read_proposal_frames(args.features)
    gold = read_gold(args.gold)
    if not gold:
        raise CliError("gold file has no records")
    embeddings = parse_embeddings(args.embeddings)
    thresholds = _float_args(args.thresholds)
    by_id = {f.frame_id: f for f in frames}

    missing = embeddings.missing_words({g.entity for g in gold})
    if missing:
        raise CliError("gold entities missing from embeddings: " + ", ".join(missing))
    predictions = []
    for record in gold:
        if record.frame_id not in by_id:
            raise CliError(f"gold references unknown frame {record.frame_id!r}")
        vec = embeddings.entity_vector(record.entity)
        predictions.append(ground(model, by_id[record.frame_id], record.entity, vec))

    records: list[dict] = []
    rows: list[tuple[str, list[str]]] = []
    if args.with_upper_bound:
        cells = []
        for thr in thresholds:
            value = upper_bound(frames, gold, thr)
            cells.append(f"{value:.2f}")
            records.append({"metric": "upper_bound", "threshold": thr, "value": value})
        rows.append(("upperbound", cells))
    if args.with_random:
        cells = []
        for thr in thresholds:
            report = random_baseline(
                frames,
                gold,
                thr,
                rng=make_rng(seed, "random-baseline"),
                trials=args.trials,
            )
            cells.append(f"{report.mean:.2f}")
            records.append(
                {
                    "metric": "random_baseline",
                    "threshold": thr,
                    "mean": report.mean,
                    "stddev": report.stddev,
                    "trials": report.trials,
                }
            )
        rows.append(("random", cells))
    cells = []
    last_report = None
    for thr in thresholds:
        report = grounding_accuracy(predictions, gold, thr)
        last_report = report
        cells.append(f"{report.percentage:.2f}")
        records.append(
            {
                "metric": "accuracy",
                "model": kind,
                "threshold": thr,
                "value": report.percentage,
                "n_evaluated": report.n_evaluated,
                "n_excluded": report.n_excluded,
            }
        )
    rows.append((kind, cells))
    table = _format_table([f"IoU {t:g}" for t in thresholds], rows)
    text = (
        f"grounding accuracy ({kind} model)\n{table}\n"
        f"evaluated: {last_report.n_evaluated}  excluded: {last_report.n_excluded}\n"
    )
    inputs = [args.checkpoint, args.features, args.gold, args.embeddings]
    return text, records, inputs


def cmd_eval(args) -> int:
    started = time.monotonic()
    seed = _resolve_seed(args)
    if args.task == "cls":
        text, records, inputs = _eval_cls(args, seed)
    elif args.task == "ground":
        text, records, inputs = _eval_ground(args, seed)
    else:
        raise CliError(f"unknown task {args.task!r}")
    sys.stdout.write(text)
    Path(args.report).write_text(text)
    with open(str(args.report) + ".jsonl", "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record) + "\n")
    params = {"task": args.task, "report": str(args.report)}
    if args.task == "cls":
        params["topk"] = _int_list(args.topk)
    else:
        params["thresholds"] = _float_args(args.thresholds)
        params["trials"] = args.trials
    _write_manifest(str(args.report) + ".manifest.json", "eval", params, inputs, seed, started)
    return EXIT_OK


# ---------------------------------------------------------------------------
# synth


def cmd_synth(args) -> int:
    started = time.monotonic()
    seed = _resolve_seed(args)
    spec = SynthSpec(
        n_entities=args.entities,
        frames_per_entity=args.frames_per_entity,
        proposals_per_frame=args.proposals,
        visual_dim=args.visual_dim,
        embed_dim=args.embed_dim,
        frame_dim=args.frame_dim,
        noise_sigma=args.noise,
        seed=seed,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.kind == "grounding":
        corpus = gen_grounding_corpus(spec)
        write_proposal_frames(corpus.frames, out / "proposals.jsonl", feature_dim=spec.visual_dim)
        write_gold(corpus.gold, out / "gold.jsonl")
        write_pairs(corpus.pairs, out / "pairs.jsonl")
        write_embeddings(corpus.embeddings, out / "embeddings.txt")
        write_vocabulary(corpus.vocabulary, out / "vocab.txt")
        print(
            f"grounding corpus: {len(corpus.frames)} frames, "
            f"{spec.n_entities} entities, K={spec.proposals_per_frame} -> {out}"
        )
    elif args.kind == "classification":
        corpus = gen_classification_corpus(spec)
        write_frame_vectors(corpus.frames, out / "frames.jsonl", feature_dim=spec.frame_dim)
        write_pairs(corpus.pairs, out / "pairs.jsonl")
        print(
            f"classification corpus: {len(corpus.frames)} frames, "
            f"{spec.n_entities} classes -> {out}"
        )
    else:
        raise CliError(f"unknown corpus kind {args.kind!r}")
    params = {
        "kind": args.kind,
        "entities": spec.n_entities,
        "frames_per_entity": spec.frames_per_entity,
        "proposals": spec.proposals_per_frame,
        "visual_dim": spec.visual_dim,
        "embed_dim": spec.embed_dim,
        "frame_dim": spec.frame_dim,
        "noise": spec.noise_sigma,
        "out": str(out),
    }
    _write_manifest(out / "manifest.json", "synth", params, [], seed, started)
    return EXIT_OK


# ---------------------------------------------------------------------------
# gradcheck


def _randomize_biases(layers, rng) -> None:
    # Glorot leaves biases at zero; give them small values so bias gradients
    # are exercised away from the origin.
    for layer in layers:
        layer.bias[:] = 0.1 * rng.standard_normal(layer.bias.shape)


def _draw_clear_of_relu_kinks(layer: LinearLayer, rng, n_rows: int, margin: float = 1e-4):
    """Random inputs whose pre-activations stay clear of the ReLU kink.

    Central differences are meaningless within a step of a kink, so inputs
    that land a pre-activation inside ``margin`` of zero are redrawn.
    """
    for _ in range(200):
        x = rng.standard_normal((n_rows, layer.n_in))
        z = linear_forward(layer, x)
        if np.min(np.abs(z)) > margin:
            return x
    raise CliError("could not draw inputs clear of ReLU kinks")


def _case_linear(rng):
    n_in = int(rng.integers(2, 6))
    n_out = int(rng.integers(1, 5))
    n_rows = int(rng.integers(1, 4))
    layer = LinearLayer(
        weights=rng.standard_normal((n_out, n_in)), bias=rng.standard_normal(n_out)
    )
    x = rng.standard_normal((n_rows, n_in))
    target = rng.standard_normal((n_rows, n_out))
    params = {"weights": layer.weights, "bias": layer.bias}

    def loss_fn(p):
        y = linear_forward(layer, x)
        loss, dy = mean_squared_error(y, target)
        gw, gb, _ = linear_backward(layer, x, dy)
        return loss, {"weights": gw, "bias": gb}

    return loss_fn, params


def _case_classifier(rng, mode: str):
    n_classes = int(rng.integers(2, 5))
    dim = int(rng.integers(2, 6))
    hidden = int(rng.integers(2, 6))
    batch = int(rng.integers(1, 4))
    model = ClassifierModel(
        class_index=[f"c{i}" for i in range(n_classes)],
        feature_dim=dim,
        mode=mode,
        hidden=hidden,
        dropout_rate=0.0,
        rng=rng,
    )
    _randomize_biases([model.layer1, model.layer2], rng)
    x = _draw_clear_of_relu_kinks(model.layer1, rng, batch)
    if mode == "single":
        targets = rng.integers(0, n_classes, size=batch)
    else:
        targets = (rng.random((batch, n_classes)) < 0.5).astype(np.float64)
    params = model.params()

    def loss_fn(p):
        out, cache = model.logits(x, training=False)
        if mode == "single":
            loss, grad_out = cross_entropy(out, targets)
        else:
            loss, grad_out = binary_cross_entropy(out, targets)
        return loss, model.backward(cache, grad_out)

    return loss_fn, params


def _case_mil(rng):
    n_items = int(rng.integers(2, 4))
    k = int(rng.integers(1, 4))
    visual_dim = int(rng.integers(2, 5))
    embed_dim = int(rng.integers(2, 5))
    hidden = int(rng.integers(2, 6))
    joint = int(rng.integers(2, 4))
    delta = float(rng.uniform(0.05, 0.2))
    for _ in range(200):
        model = MilModel(
            visual_dim=visual_dim,
            embed_dim=embed_dim,
            hidden=hidden,
            joint_dim=joint,
            dropout_rate=0.0,
            rng=rng,
        )
        _randomize_biases([model.visual1, model.visual2, model.word], rng)
        items = [
            MilItem(
                entity=f"e{i}",
                entity_vec=rng.standard_normal(embed_dim),
                features=rng.standard_normal((k, visual_dim)),
            )
            for i in range(n_items)
        ]
        negatives = [(i + 1) % n_items for i in range(n_items)]
        if _mil_case_is_smooth(model, items, negatives, delta):
            break
    else:
        raise CliError("could not draw a MIL case clear of hinge/max kinks")
    params = model.params()

    def loss_fn(p):
        return mil_loss(model, items, delta=delta, negatives=negatives, training=False)

    return loss_fn, params


def _mil_case_is_smooth(model, items, negatives, delta, margin: float = 1e-3) -> bool:
    """True when every hinge, max, and ReLU sits clear of its kink."""
    stacked = np.concatenate([item.features for item in items])
    z1 = linear_forward(model.visual1, stacked)
    if np.min(np.abs(z1)) <= margin:
        return False
    phi, _ = model.encode_proposals(stacked, training=False)
    psi = model.encode_entities(np.stack([item.entity_vec for item in items]))
    offsets = np.cumsum([0] + [item.features.shape[0] for item in items])

    def frame_score(a, b):
        scores = phi[offsets[a] : offsets[a + 1]] @ psi[b]
        if len(scores) > 1:
            top2 = np.sort(scores)[-2:]
            if top2[1] - top2[0] <= margin:
                return None
        return float(np.max(scores))

    for i in range(len(items)):
        l = negatives[i]
        triple = (frame_score(i, i), frame_score(i, l), frame_score(l, i))
        if any(s is None for s in triple):
            return False
        s_ii, s_il, s_li = triple
        if abs(s_il - s_ii + delta) <= margin or abs(s_li - s_ii + delta) <= margin:
            return False
    return True


def _case_recon(rng):
    k = int(rng.integers(1, 5))
    visual_dim = int(rng.integers(2, 5))
    embed_dim = int(rng.integers(2, 5))
    joint = int(rng.integers(2, 4))
    model = ReconModel(visual_dim=visual_dim, embed_dim=embed_dim, joint_dim=joint, rng=rng)
    _randomize_biases([model.visual, model.word, model.attention, model.reconstructor], rng)
    features = rng.standard_normal((k, visual_dim))
    entity_vec = rng.standard_normal(embed_dim)
    params = model.params()

    def loss_fn(p):
        return recon_loss(model, features, entity_vec)

    return loss_fn, params


GRADCHECK_TASKS = {
    "linear": lambda rng: _case_linear(rng),
    "cls-single": lambda rng: _case_classifier(rng, "single"),
    "cls-multi": lambda rng: _case_classifier(rng, "multi"),
    "mil": lambda rng: _case_mil(rng),
    "recon": lambda rng: _case_recon(rng),
}


def run_gradcheck(task: str, cases: int, tolerance: float, seed: int) -> tuple[bool, float]:
    """Finite-difference audit of one task over ``cases`` random settings.

    Returns (passed, worst relative error seen).
    """
    builder = GRADCHECK_TASKS[task]
    worst = 0.0
    for case in range(cases):
        rng = make_rng(seed, "gradcheck", task, case)
        loss_fn, params = builder(rng)
        report = finite_diff_check(loss_fn, params, tolerance=tolerance)
        worst = max(worst, report.max_rel_error)
        if not report.passed:
            return False, worst
    return True, worst


def cmd_gradcheck(args) -> int:
    seed = _resolve_seed(args)
    tasks = list(GRADCHECK_TASKS) if args.task == "all" else [args.task]
    if args.task == "cls":
        tasks = ["cls-single", "cls-multi"]
    failed = False
    for task in tasks:
        tolerance = args.tolerance
        if tolerance is None:
            tolerance = GRADCHECK_TOLERANCE_LINEAR if task == "linear" else GRADCHECK_TOLERANCE
        ok, worst = run_gradcheck(task, args.cases, tolerance, seed)
        status = "PASS" if ok else "FAIL"
        print(
            f"gradcheck {task}: {args.cases} cases, worst rel error {worst:.3e}, "
            f"tolerance {tolerance:.0e} ... {status}"
        )
        failed = failed or not ok
    return EXIT_CHECK_FAILED if failed else EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="groundkit",
        description="Entity/frame pair extraction, weak recognition and grounding training.",
    )
    parser.add_argument("--version", action="version", version=f"groundkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="scan CTM transcripts into entity/frame pairs")
    p.add_argument("--ctm", action="append", required=True, help="CTM file (repeatable)")
    p.add_argument("--vocab", required=True, help="entity vocabulary, one entry per line")
    p.add_argument("--out", required=True, help="output pairs file (JSON lines)")
    p.add_argument("--min-count", type=int, default=5, help="corpus-wide frequency floor")
    p.add_argument(
        "--no-merge-plural",
        dest="merge_plural",
        action="store_false",
        help="keep plural and singular mentions distinct",
    )
    p.add_argument("--irregular", help="irregular plural lexicon ('plural singular' lines)")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", help="train a recognition or grounding model")
    p.add_argument(
        "--task", required=True, choices=["cls-single", "cls-multi", "mil", "recon"]
    )
    p.add_argument("--features", required=True, help="frame vectors (cls) or proposal frames")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--pairs", help="entity/frame pairs (labels and class index)")
    p.add_argument("--embeddings", help="word embedding table (mil/recon)")
    p.add_argument("--lr", type=float, default=None, help="learning rate (per-task default)")
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--delta", type=float, default=0.01, help="hinge margin (mil)")
    p.add_argument("--hidden", type=int, default=None, help="hidden width (cls 256, mil 512)")
    p.add_argument("--joint-dim", type=int, default=100, help="joint space width (mil/recon)")
    p.add_argument("--dropout", type=float, default=None, help="dropout rate (cls 0.5, mil 0.2)")
    p.add_argument(
        "--freeze-target",
        action="store_true",
        help="recon: no gradients through the target embedding",
    )
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--task", required=True, choices=["cls", "ground"])
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--report", required=True, help="report text path")
    p.add_argument("--gold", help="gold annotations (required for grounding)")
    p.add_argument("--embeddings", help="word embedding table (grounding)")
    p.add_argument("--topk", default="1,5,10,20", help="comma-separated k values (cls)")
    p.add_argument("--thresholds", default="0.5,0.3,0.1", help="comma-separated IoU thresholds")
    p.add_argument("--with-upper-bound", action="store_true", help="report the proposal ceiling")
    p.add_argument("--with-random", action="store_true", help="report the random-pick baseline")
    p.add_argument("--trials", type=int, default=100, help="random baseline repetitions")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="generate a planted synthetic corpus")
    p.add_argument("--kind", default="grounding", choices=["grounding", "classification"])
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--entities", type=int, default=20)
    p.add_argument("--frames-per-entity", type=int, default=100)
    p.add_argument("--proposals", type=int, default=10)
    p.add_argument("--visual-dim", type=int, default=64)
    p.add_argument("--embed-dim", type=int, default=100)
    p.add_argument("--frame-dim", type=int, default=64)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("gradcheck", help="finite-difference audit of every backward pass")
    p.add_argument(
        "--task",
        default="all",
        choices=["all", "linear", "cls", "cls-single", "cls-multi", "mil", "recon"],
    )
    p.add_argument("--cases", type=int, default=100, help="random settings per task")
    p.add_argument(
        "--tolerance",
        type=float,
        default=None,
        help="max relative error (default 1e-4; 1e-6 for the linear task)",
    )
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if not exc.code else int(exc.code)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericsError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except _USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
