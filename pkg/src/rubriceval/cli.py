"""Command-line entry point.

Subcommands cover the whole pipeline: rubric management, image dataset
generation, judge runs, annotation import/export, validity analysis,
report rendering, and the annotation service. Every writing command
appends a run-metadata record (resolved config, its hash, counts) to a
runs.jsonl next to its output so runs can be reproduced exactly.

API keys are read only from environment variables (JUDGE_API_KEY,
IMAGEGEN_API_KEY); config files carrying key-like fields are rejected.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import uuid
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import analytics, dataset, judge, reporting, rubric_gen
from .annotations import (
    KIND_CRITERION,
    KIND_HOLISTIC,
    AnnotationStore,
    now_timestamp,
    resolve,
)
from .errors import ConfigError, ContractError, HarnessError
from .packs import PACK_RUBRIC_IDS, load_builtin_rubric
from .rubric import content_hash, load_rubric, serialize_rubric, validate_rubric

_SECRET_HINTS = ("api_key", "apikey", "token", "secret", "password")


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}")
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path} must be a JSON object")
    for key in doc:
        lowered = key.lower()
        if any(hint in lowered for hint in _SECRET_HINTS):
            raise ConfigError(
                f"config field {key!r} looks like a credential; API keys "
                "come from environment variables only"
            )
    return doc


def _resolve(args, config: dict, name: str, default=None):
    """Flag value if given, else config value, else default."""
    value = getattr(args, name, None)
    if value is not None:
        return value
    return config.get(name, default)


def _require(value, flag: str):
    if value is None:
        raise ConfigError(f"missing required option {flag} (flag or config)")
    return value


def _load_rubric_arg(ref: str):
    if ref in PACK_RUBRIC_IDS:
        return load_builtin_rubric(ref)
    path = Path(ref)
    if path.is_file():
        return load_rubric(path.read_text())
    raise ConfigError(
        f"rubric {ref!r} is neither a built-in id ({', '.join(PACK_RUBRIC_IDS)}) "
        "nor a readable file"
    )


def _emit(payload: bytes | str, out: str | None) -> None:
    data = payload.encode("utf-8") if isinstance(payload, str) else payload
    if out is None:
        sys.stdout.write(data.decode("utf-8"))
    else:
        target = Path(out)
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_bytes(data)


def _config_hash(effective: dict) -> str:
    canonical = json.dumps(effective, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def write_run_record(
    target: Path, command: str, effective_config: dict, counts: dict, started_at: str
) -> None:
    """Append one run-metadata line to runs.jsonl beside the written file."""
    entry = {
        "kind": "run",
        "run_id": uuid.uuid4().hex,
        "command": command,
        "target": target.name,
        "config": effective_config,
        "config_hash": _config_hash(effective_config),
        "started_at": started_at,
        "finished_at": now_timestamp(),
        "counts": counts,
    }
    runs_path = target.resolve().parent / "runs.jsonl"
    with open(runs_path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(entry, sort_keys=True) + "\n")


_FORMAT_ALIASES = {"csv": "csv", "md": "markdown", "json": "structured"}


def _render_format(name: str) -> str:
    if name not in _FORMAT_ALIASES:
        raise ConfigError(f"unknown format {name!r}; expected csv, md, or json")
    return _FORMAT_ALIASES[name]


# rubric subcommands


def cmd_rubric_validate(args) -> int:
    try:
        rubric = _load_rubric_arg(args.rubric)
    except HarnessError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}))
        return 1
    issues = validate_rubric(rubric)
    if issues:
        for issue in issues:
            print(f"{issue.path}: {issue.message}")
        return 1
    print(
        f"ok: {rubric.rubric_id} v{rubric.version} "
        f"({rubric.criterion_count} criteria, hash {content_hash(rubric)[:12]})"
    )
    return 0


class _FileResponseClient:
    """LLM stand-in that replays one canned response from a file."""

    def __init__(self, path: str):
        self.text = Path(path).read_text()

    def complete(self, system_text, user_text, config):
        return self.text


def cmd_rubric_generate(args) -> int:
    config = _load_config(args.config)
    started = now_timestamp()
    prompt = _resolve(args, config, "prompt")
    artifact = _resolve(args, config, "artifact")
    if prompt is None:
        profile = dataset.builtin_profiles().get(_require(artifact, "--artifact"))
        if profile is None:
            raise ConfigError(f"unknown built-in artifact {artifact!r}")
        variant = _resolve(args, config, "variant", "artifact_only")
        prompt = dataset.render_generation_prompt(profile, variant)
    artifact_id = _resolve(args, config, "artifact_id", artifact or "artifact")
    model_id = _resolve(args, config, "model_id", "text-model")
    judge_config = judge.JudgeConfig(
        model_id=model_id,
        temperature=float(_resolve(args, config, "temperature", 1.0)),
    )
    if args.mock_response is not None:
        client = _FileResponseClient(args.mock_response)
    else:
        endpoint = _require(_resolve(args, config, "endpoint"), "--endpoint")
        client = judge.HttpJudgeClient(endpoint)
    rubric = rubric_gen.generate_rubric(prompt, artifact_id, judge_config, client)
    _emit(serialize_rubric(rubric), args.out)
    if args.out is not None:
        write_run_record(
            Path(args.out),
            "rubric generate",
            {"prompt": prompt, "artifact_id": artifact_id, "model_id": model_id},
            {"criteria": rubric.criterion_count},
            started,
        )
    return 0


def cmd_rubric_diff(args) -> int:
    left = _load_rubric_arg(args.left)
    right = _load_rubric_arg(args.right)
    diff = rubric_gen.diff_rubrics(left, right)
    fmt = args.format or "md"
    if fmt == "json":
        _emit(json.dumps(rubric_gen.diff_to_dict(diff), indent=2) + "\n", args.out)
    elif fmt == "md":
        _emit(rubric_gen.render_diff_report(diff), args.out)
    else:
        raise ConfigError("rubric diff supports --format md or json")
    return 0


# dataset subcommands


def _load_profile(args, config) -> dataset.ArtifactProfile:
    profile_path = _resolve(args, config, "profile")
    if profile_path is not None:
        doc = json.loads(Path(profile_path).read_text())
        return dataset.ArtifactProfile(
            artifact_id=doc["artifact_id"],
            display_name=doc["display_name"],
            description=doc.get("description"),
            revised_prompt=doc.get("revised_prompt"),
        )
    artifact = _require(_resolve(args, config, "artifact"), "--artifact")
    profile = dataset.builtin_profiles().get(artifact)
    if profile is None:
        raise ConfigError(f"unknown built-in artifact {artifact!r}")
    return profile


def cmd_dataset_generate(args) -> int:
    config = _load_config(args.config)
    started = now_timestamp()
    profile = _load_profile(args, config)
    variant = _resolve(args, config, "variant", "artifact_only")
    model_id = _require(_resolve(args, config, "model_id"), "--model-id")
    n = int(_resolve(args, config, "n", 10))
    out_dir = Path(_require(_resolve(args, config, "out_dir"), "--out-dir"))
    manifest_path = Path(
        _resolve(args, config, "manifest", out_dir / "manifest.jsonl")
    )
    parallelism = int(_resolve(args, config, "parallelism", 1))
    if args.mock_imagegen:
        client = dataset.MockImageGenClient()
    else:
        endpoint = _require(_resolve(args, config, "endpoint"), "--endpoint")
        adapter = _resolve(args, config, "adapter", "openai_images")
        client = dataset.HttpImageGenClient(endpoint, adapter=adapter)
    manifest = dataset.generate_images(
        profile,
        variant,
        model_id,
        client,
        n,
        out_dir,
        parallelism=parallelism,
        group=_resolve(args, config, "group"),
    )
    dataset.write_manifest(manifest, manifest_path)
    counts = {"generated": len(manifest.records), "skipped": len(manifest.skipped)}
    write_run_record(
        manifest_path,
        "dataset generate",
        {
            "artifact_id": profile.artifact_id,
            "prompt_variant": variant,
            "model_id": model_id,
            "n": n,
            "parallelism": parallelism,
            "mock": bool(args.mock_imagegen),
        },
        counts,
        started,
    )
    print(json.dumps({"manifest": str(manifest_path), **counts}))
    if not manifest.records:
        return 1
    return 0


def cmd_dataset_validate(args) -> int:
    manifest_path = Path(_require(args.manifest, "--manifest"))
    manifest = dataset.load_manifest(manifest_path)
    issues = dataset.validate_manifest(manifest, manifest_path.parent)
    for issue in issues:
        print(issue)
    if issues:
        return 1
    print(f"ok: {len(manifest.records)} images, {len(manifest.skipped)} skipped")
    return 0


# judge run


def _payload_for(record: dataset.ImageRecord, root: Path) -> judge.ImagePayload:
    data = (root / record.file_ref).read_bytes()
    suffix = Path(record.file_ref).suffix.lower()
    media = {"jpg": "image/jpeg", "jpeg": "image/jpeg"}.get(
        suffix.lstrip("."), "image/png"
    )
    return judge.ImagePayload(image_id=record.image_id, data=data, media_type=media)


def cmd_judge_run(args) -> int:
    config = _load_config(args.config)
    started = now_timestamp()
    manifest_path = Path(_require(_resolve(args, config, "manifest"), "--manifest"))
    manifest = dataset.load_manifest(manifest_path)
    rubric = _load_rubric_arg(_require(_resolve(args, config, "rubric"), "--rubric"))
    store_path = Path(_require(_resolve(args, config, "store"), "--store"))
    model_id = _require(_resolve(args, config, "model_id"), "--model-id")
    judge_config = judge.JudgeConfig(
        model_id=model_id,
        temperature=float(_resolve(args, config, "temperature", 1.0)),
        n_seeds=int(_resolve(args, config, "seeds", 5)),
        max_retries_per_call=int(_resolve(args, config, "retries", 3)),
        parallelism=int(_resolve(args, config, "parallelism", 1)),
    )
    if args.mock_judge is not None:
        client = judge.MockJudgeClient(args.mock_judge)
    else:
        endpoint = _require(_resolve(args, config, "endpoint"), "--endpoint")
        client = judge.HttpJudgeClient(endpoint)

    profiles = dataset.builtin_profiles()
    run_id = uuid.uuid4().hex
    raw_sink = None
    raw_archive_path = _resolve(args, config, "raw_archive")
    if raw_archive_path is not None:
        raw_sink = judge.RawArchive(raw_archive_path, run_id=run_id).sink

    store = AnnotationStore(store_path, [rubric])
    rubric_hash = content_hash(rubric)
    counts = {
        "images": 0,
        "verdicts": 0,
        "seeds_skipped": 0,
        "judge_failed_images": 0,
        "retries": 0,
    }

    def artifact_name(record: dataset.ImageRecord) -> str:
        if args.artifact_name is not None:
            return args.artifact_name
        profile = profiles.get(record.artifact_id)
        if profile is not None:
            return profile.display_name
        return record.artifact_id.replace("_", " ")

    def run_one(record: dataset.ImageRecord):
        wanted = list(range(judge_config.n_seeds))
        if not args.force:
            wanted = [
                s
                for s in wanted
                if not store.has_mllm_verdict(record.image_id, s, rubric_hash, model_id)
            ]
        skipped = judge_config.n_seeds - len(wanted)
        if not wanted:
            return record, None, skipped
        result = judge.judge_image(
            _payload_for(record, manifest_path.parent),
            rubric,
            judge_config,
            client,
            artifact_name=artifact_name(record),
            generation_prompt=record.prompt_text,
            seed_indices=wanted,
            raw_sink=raw_sink,
        )
        return record, result, skipped

    if judge_config.parallelism > 1:
        with ThreadPoolExecutor(max_workers=judge_config.parallelism) as pool:
            outcomes = list(pool.map(run_one, manifest.records))
    else:
        outcomes = [run_one(record) for record in manifest.records]

    # store writes stay in this thread: single-writer appends
    for record, result, skipped in outcomes:
        counts["images"] += 1
        counts["seeds_skipped"] += skipped
        if result is None:
            continue
        counts["retries"] += len(result.retries)
        if result.judge_failed:
            counts["judge_failed_images"] += 1
            continue
        for verdict in result.verdicts:
            store.append(judge.verdict_to_record(verdict, model_id, run_id=run_id))
            counts["verdicts"] += 1

    write_run_record(
        store_path,
        "judge run",
        {
            "manifest": str(manifest_path),
            "rubric_id": rubric.rubric_id,
            "rubric_hash": rubric_hash,
            "model_id": model_id,
            "temperature": judge_config.temperature,
            "seeds": judge_config.n_seeds,
            "retries": judge_config.max_retries_per_call,
            "force": bool(args.force),
            "mock": args.mock_judge is not None,
            "run_id": run_id,
        },
        counts,
        started,
    )
    print(json.dumps(counts))
    return 0


# annotate subcommands


def cmd_annotate_import(args) -> int:
    config = _load_config(args.config)
    started = now_timestamp()
    rubric = _load_rubric_arg(_require(_resolve(args, config, "rubric"), "--rubric"))
    store_path = Path(_require(_resolve(args, config, "store"), "--store"))
    store = AnnotationStore(store_path, [rubric])
    with open(args.input, encoding="utf-8") as fh:
        summary = store.import_annotations(fh)
    counts = {"imported": summary.imported, "rejected": len(summary.rejected)}
    write_run_record(
        store_path,
        "annotate import",
        {"input": args.input, "rubric_hash": content_hash(rubric)},
        counts,
        started,
    )
    print(
        json.dumps(
            {
                **counts,
                "rejects": [
                    {"line": line, "reason": reason}
                    for line, reason in summary.rejected
                ],
            }
        )
    )
    return 0


def cmd_annotate_export(args) -> int:
    config = _load_config(args.config)
    rubric_ref = _resolve(args, config, "rubric")
    rubrics = [_load_rubric_arg(rubric_ref)] if rubric_ref else []
    store_path = Path(_require(_resolve(args, config, "store"), "--store"))
    store = AnnotationStore(store_path, rubrics)

    def keep(rec) -> bool:
        if args.kind is not None and rec.kind != args.kind:
            return False
        if args.source_kind is not None and rec.source.kind != args.source_kind:
            return False
        if args.image_id is not None and rec.image_id != args.image_id:
            return False
        if args.annotator is not None and rec.source.annotator_id != args.annotator:
            return False
        return True

    _emit("".join(store.export_annotations(keep)), args.out)
    return 0


# analyze subcommands


def _resolved_human(store: AnnotationStore, rubric) -> list:
    records = store.effective_records(
        kind=KIND_CRITERION, source_kind="human", rubric_hash=content_hash(rubric)
    )
    return [resolve(rec, rubric) for rec in records]


def _resolved_mllm(store: AnnotationStore, rubric, model_id: str | None = None) -> list:
    """Judge verdicts resolved to labels, last record winning per (model, seed)."""
    latest = {}
    order = []
    for rec in store.records(
        kind=KIND_CRITERION, source_kind="mllm", rubric_hash=content_hash(rubric)
    ):
        if model_id is not None and rec.source.model_id != model_id:
            continue
        key = (rec.source.identity(), rec.image_id)
        if key not in latest:
            order.append(key)
        latest[key] = rec
    return [resolve(latest[k], rubric) for k in order]


def cmd_analyze_agreement(args) -> int:
    config = _load_config(args.config)
    rubric = _load_rubric_arg(_require(_resolve(args, config, "rubric"), "--rubric"))
    human_path = _require(_resolve(args, config, "human"), "--human")
    mllm_path = _require(_resolve(args, config, "mllm"), "--mllm")
    reduction = _resolve(args, config, "reduction", "mean")
    ref = _resolved_human(AnnotationStore(human_path, [rubric]), rubric)
    pred = _resolved_mllm(
        AnnotationStore(mllm_path, [rubric]), rubric, _resolve(args, config, "model_id")
    )
    report = analytics.build_agreement_report(
        pred, ref, rubric, reduction=reduction, artifact_id=rubric.artifact_id
    )
    fmt = args.format or "json"
    if fmt == "json":
        _emit(
            json.dumps(analytics.report_to_dict(report), indent=2, sort_keys=True)
            + "\n",
            args.out,
        )
    else:
        data = reporting.per_criterion_data(report, rubric)
        spec = reporting.RenderSpec(format=_render_format(fmt), target="per_criterion")
        _emit(reporting.render(data, spec), args.out)
    return 0


def cmd_analyze_validation(args) -> int:
    config = _load_config(args.config)
    rubric = _load_rubric_arg(_require(_resolve(args, config, "rubric"), "--rubric"))
    store = AnnotationStore(
        Path(_require(_resolve(args, config, "store"), "--store")), [rubric]
    )
    rubric_labels = {
        image_id: labels.overall
        for image_id, labels in analytics.reference_labels(
            _resolved_human(store, rubric), rubric
        ).items()
    }
    ratings: dict[str, list[tuple[int, str]]] = {}
    for rec in store.effective_records(kind=KIND_HOLISTIC):
        ratings.setdefault(rec.image_id, []).append(
            (rec.holistic_rating, rec.rating_scale)
        )
    summary = analytics.workshop_validation(rubric_labels, ratings)
    fmt = args.format or "json"
    if fmt == "json":
        _emit(
            json.dumps(analytics.validation_to_dict(summary), indent=2, sort_keys=True)
            + "\n",
            args.out,
        )
    else:
        data = {
            "rows": [
                {
                    "label": rubric.artifact_id,
                    "n_images": summary.n_images,
                    "agreement": summary.agreement,
                    "contested_fraction": summary.contested_fraction,
                    "community_base_rate": summary.community_base_rate,
                    "measure_base_rate": summary.measure_base_rate,
                }
            ]
        }
        spec = reporting.RenderSpec(format=_render_format(fmt), target="table4")
        _emit(reporting.render(data, spec), args.out)
    return 0


def cmd_analyze_interannotator(args) -> int:
    config = _load_config(args.config)
    rubric = _load_rubric_arg(_require(_resolve(args, config, "rubric"), "--rubric"))
    store = AnnotationStore(
        Path(_require(_resolve(args, config, "store"), "--store")), [rubric]
    )
    annotator_a = _require(_resolve(args, config, "annotator_a"), "--annotator-a")
    annotator_b = _require(_resolve(args, config, "annotator_b"), "--annotator-b")
    by_annotator: dict[str, dict[str, int]] = {annotator_a: {}, annotator_b: {}}
    for labels in _resolved_human(store, rubric):
        annotator = labels.source.annotator_id
        if annotator in by_annotator:
            by_annotator[annotator][labels.image_id] = labels.overall
    shared = sorted(set(by_annotator[annotator_a]) & set(by_annotator[annotator_b]))
    if not shared:
        raise ContractError(
            f"annotators {annotator_a!r} and {annotator_b!r} share no images"
        )
    value = analytics.interannotator(
        [by_annotator[annotator_a][i] for i in shared],
        [by_annotator[annotator_b][i] for i in shared],
    )
    fmt = args.format or "json"
    if fmt == "json":
        _emit(
            json.dumps(
                {
                    "annotator_a": annotator_a,
                    "annotator_b": annotator_b,
                    "n_images": len(shared),
                    "agreement": float(value),
                },
                indent=2,
                sort_keys=True,
            )
            + "\n",
            args.out,
        )
    else:
        data = {"rows": [{"label": rubric.artifact_id, "agreement": value}]}
        spec = reporting.RenderSpec(format=_render_format(fmt), target="table5")
        _emit(reporting.render(data, spec), args.out)
    return 0


def cmd_analyze_breakdown(args) -> int:
    config = _load_config(args.config)
    rubric = _load_rubric_arg(_require(_resolve(args, config, "rubric"), "--rubric"))
    store = AnnotationStore(
        Path(_require(_resolve(args, config, "store"), "--store")), [rubric]
    )
    manifest = dataset.load_manifest(
        Path(_require(_resolve(args, config, "manifest"), "--manifest"))
    )
    model_of = {rec.image_id: rec.model_id for rec in manifest.records}
    source = _resolve(args, config, "source", "human")
    if source == "human":
        per_image = analytics.reference_labels(_resolved_human(store, rubric), rubric)
    elif source == "mllm":
        by_image: dict[str, list] = {}
        for labels in _resolved_mllm(store, rubric, _resolve(args, config, "model_id")):
            by_image.setdefault(labels.image_id, []).append(labels)
        per_image = {
            image_id: analytics.consensus_labels(verdicts, rubric)
            for image_id, verdicts in by_image.items()
        }
    else:
        raise ConfigError("--source must be human or mllm")
    missing = sorted(set(per_image) - set(model_of))
    if missing:
        raise ContractError(
            "labeled images missing from the manifest: " + ", ".join(missing)
        )
    entries = [
        (model_of[image_id], per_image[image_id].criteria)
        for image_id in sorted(per_image)
    ]
    breakdown = analytics.model_breakdown(entries, rubric)
    fmt = args.format or "json"
    if fmt == "json":
        _emit(
            json.dumps(analytics.breakdown_to_dict(breakdown), indent=2, sort_keys=True)
            + "\n",
            args.out,
        )
    else:
        data = reporting.violation_bars_data(breakdown, rubric)
        spec = reporting.RenderSpec(format=_render_format(fmt), target="violation_bars")
        _emit(reporting.render(data, spec), args.out)
    return 0


# report render


def cmd_report_render(args) -> int:
    doc = json.loads(Path(_require(args.data, "--data")).read_text())
    spec = reporting.RenderSpec(
        format=_render_format(args.format or "csv"),
        target=_require(args.target, "--target"),
        decimals=args.decimals,
    )
    _emit(reporting.render(doc, spec), args.out)
    return 0


# serve


def cmd_serve(args) -> int:
    from . import service

    config = _load_config(args.config)
    rubric = _load_rubric_arg(_require(_resolve(args, config, "rubric"), "--rubric"))
    manifest_path = Path(_require(_resolve(args, config, "manifest"), "--manifest"))
    manifest = dataset.load_manifest(manifest_path)
    store = AnnotationStore(
        Path(_require(_resolve(args, config, "store"), "--store")), [rubric]
    )
    host = _resolve(args, config, "host", "127.0.0.1")
    port = int(_resolve(args, config, "port", 8000))
    server = service.AnnotationService(
        rubric=rubric,
        manifest=manifest,
        image_root=manifest_path.parent,
        store=store,
        host=host,
        port=port,
        ui_dir=_resolve(args, config, "ui_dir"),
    )
    print(f"serving on http://{server.host}:{server.port}/ (Ctrl-C stops)")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.shutdown()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rubriceval",
        description="Rubric-based evaluation of AI-generated artifact images.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(subparser, *flags, **kwargs):
        subparser.add_argument(*flags, **kwargs)

    def common(p):
        p.add_argument("--config", help="JSON config file supplying flag defaults")
        p.add_argument("--out", help="write output here instead of stdout")

    # rubric
    rubric_cmd = sub.add_parser("rubric", help="rubric tools").add_subparsers(
        dest="subcommand", required=True
    )
    p = rubric_cmd.add_parser("validate", help="check a rubric file or pack id")
    p.add_argument("rubric")
    p.add_argument("--config")
    p.set_defaults(func=cmd_rubric_validate)

    p = rubric_cmd.add_parser("generate", help="generate a rubric with an LLM")
    common(p)
    add(p, "--prompt", help="image-generation prompt to build criteria for")
    add(p, "--artifact", help="built-in artifact id (renders the prompt)")
    add(p, "--variant", choices=dataset.PROMPT_VARIANTS)
    add(p, "--artifact-id", dest="artifact_id")
    add(p, "--model-id", dest="model_id")
    add(p, "--endpoint")
    add(p, "--temperature", type=float)
    add(p, "--mock-response", dest="mock_response", help="replay a canned LLM response file")
    p.set_defaults(func=cmd_rubric_generate)

    p = rubric_cmd.add_parser("diff", help="lexical diff of two rubrics")
    common(p)
    p.add_argument("left")
    p.add_argument("right")
    add(p, "--format", choices=["md", "json"])
    p.set_defaults(func=cmd_rubric_diff)

    # dataset
    dataset_cmd = sub.add_parser("dataset", help="image dataset tools").add_subparsers(
        dest="subcommand", required=True
    )
    p = dataset_cmd.add_parser("generate", help="generate images into a manifest")
    common(p)
    add(p, "--artifact")
    add(p, "--profile", help="JSON artifact profile file")
    add(p, "--variant", choices=dataset.PROMPT_VARIANTS)
    add(p, "--model-id", dest="model_id")
    add(p, "--n", type=int)
    add(p, "--out-dir", dest="out_dir")
    add(p, "--manifest")
    add(p, "--endpoint")
    add(p, "--adapter", choices=dataset.HttpImageGenClient.ADAPTERS)
    add(p, "--parallelism", type=int)
    add(p, "--group")
    add(p, "--mock-imagegen", action="store_true", help="offline deterministic PNGs")
    p.set_defaults(func=cmd_dataset_generate)

    p = dataset_cmd.add_parser("validate", help="re-verify a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--config")
    p.set_defaults(func=cmd_dataset_validate)

    # judge
    judge_cmd = sub.add_parser("judge", help="MLLM judging").add_subparsers(
        dest="subcommand", required=True
    )
    p = judge_cmd.add_parser("run", help="judge every manifest image")
    common(p)
    add(p, "--manifest")
    add(p, "--rubric")
    add(p, "--store")
    add(p, "--model-id", dest="model_id")
    add(p, "--endpoint")
    add(p, "--mock-judge", dest="mock_judge", help="scripted verdict file (JSONL)")
    add(p, "--seeds", type=int, help="stochastic seed runs per image")
    add(p, "--temperature", type=float)
    add(p, "--retries", type=int)
    add(p, "--parallelism", type=int)
    add(p, "--raw-archive", dest="raw_archive", help="append raw responses here")
    add(p, "--artifact-name", dest="artifact_name")
    add(p, "--force", action="store_true", help="re-judge already-recorded seeds")
    p.set_defaults(func=cmd_judge_run)

    # annotate
    annotate_cmd = sub.add_parser("annotate", help="annotation store IO").add_subparsers(
        dest="subcommand", required=True
    )
    p = annotate_cmd.add_parser("import", help="import annotation JSONL")
    common(p)
    p.add_argument("input")
    add(p, "--store")
    add(p, "--rubric")
    p.set_defaults(func=cmd_annotate_import)

    p = annotate_cmd.add_parser("export", help="export annotation JSONL")
    common(p)
    add(p, "--store")
    add(p, "--rubric")
    add(p, "--kind", choices=[KIND_CRITERION, KIND_HOLISTIC])
    add(p, "--source-kind", dest="source_kind", choices=["human", "mllm"])
    add(p, "--image-id", dest="image_id")
    add(p, "--annotator")
    p.set_defaults(func=cmd_annotate_export)

    # analyze
    analyze_cmd = sub.add_parser("analyze", help="validity analyses").add_subparsers(
        dest="subcommand", required=True
    )
    p = analyze_cmd.add_parser("agreement", help="human vs judge agreement report")
    common(p)
    add(p, "--human", help="store file with human criterion annotations")
    add(p, "--mllm", help="store file with judge verdicts")
    add(p, "--rubric")
    add(p, "--model-id", dest="model_id")
    add(p, "--reduction", choices=list(analytics.REDUCTION_MODES))
    add(p, "--format", choices=["csv", "md", "json"])
    p.set_defaults(func=cmd_analyze_agreement)

    p = analyze_cmd.add_parser("validation", help="rubric vs holistic ratings")
    common(p)
    add(p, "--store")
    add(p, "--rubric")
    add(p, "--format", choices=["csv", "md", "json"])
    p.set_defaults(func=cmd_analyze_validation)

    p = analyze_cmd.add_parser("interannotator", help="two annotators' agreement")
    common(p)
    add(p, "--store")
    add(p, "--rubric")
    add(p, "--annotator-a", dest="annotator_a")
    add(p, "--annotator-b", dest="annotator_b")
    add(p, "--format", choices=["csv", "md", "json"])
    p.set_defaults(func=cmd_analyze_interannotator)

    p = analyze_cmd.add_parser("breakdown", help="per-model appropriate fractions")
    common(p)
    add(p, "--store")
    add(p, "--rubric")
    add(p, "--manifest")
    add(p, "--source", choices=["human", "mllm"])
    add(p, "--model-id", dest="model_id")
    add(p, "--format", choices=["csv", "md", "json"])
    p.set_defaults(func=cmd_analyze_breakdown)

    # report
    report_cmd = sub.add_parser("report", help="render result tables").add_subparsers(
        dest="subcommand", required=True
    )
    p = report_cmd.add_parser("render", help="render a data file to a table")
    common(p)
    add(p, "--data", help="JSON data file matching the target shape")
    add(p, "--target", choices=list(reporting.TARGETS))
    add(p, "--format", choices=["csv", "md", "json"])
    add(p, "--decimals", type=int, default=2)
    p.set_defaults(func=cmd_report_render)

    # serve
    p = sub.add_parser("serve", help="run the annotation service")
    p.add_argument("--config")
    add(p, "--rubric")
    add(p, "--manifest")
    add(p, "--store")
    add(p, "--host")
    add(p, "--port", type=int)
    add(p, "--ui-dir", dest="ui_dir")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except HarnessError as exc:
        sys.stderr.write(
            json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n"
        )
        return 1
    except OSError as exc:
        sys.stderr.write(json.dumps({"error": "OSError", "message": str(exc)}) + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
