"""Command-line entry point.

Subcommands: fetch (download and cache benchmark files), validate (run
reference solutions against their own tests), run (execute a live or
mock experiment), report (render tables), cases (bug-type analysis of
tasks only the summary styles fix).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from importlib import resources
from pathlib import Path

import httpx

from .errors import ConfigurationError, FetchError, HarnessError, UnsupportedProtocolError
from .llm import HttpProvider, LlmConfig, MockProvider, Provider
from .metrics import CaseScope, aggregate, case_analysis, render_report
from .pipeline import Pipeline, TestRunner
from .prompts import load_template_overrides
from .records import Phase, Protocol, RepairMethod, all_methods, parse_method_key
from .sandbox import SubprocessRunner, default_shim_path
from .store import RunStore
from .tasks import (
    HUMANEVALPACK_COUNT,
    MBPP_TEST_COUNT,
    RepairTask,
    apply_exclusions,
    load_exclusions,
    load_humanevalpack,
    load_mbpp_test,
    sha256_file,
    validate_dataset,
    validation_program,
)

logger = logging.getLogger(__name__)

DATASET_URLS = {
    "hep": (
        "https://huggingface.co/datasets/bigcode/humanevalpack/resolve/main/"
        "data/python/data/humanevalpack.jsonl"
    ),
    "mbpp": (
        "https://raw.githubusercontent.com/google-research/google-research/"
        "master/mbpp/mbpp.jsonl"
    ),
}
DATASET_FILENAMES = {"hep": "humanevalpack.jsonl", "mbpp": "mbpp.jsonl"}


def _packaged_path(name: str) -> Path:
    return Path(str(resources.files("summary_repair") / "data" / name))


def load_roster(path: Path | None = None) -> list[LlmConfig]:
    roster_path = path if path is not None else _packaged_path("models.json")
    try:
        entries = json.loads(Path(roster_path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise ConfigurationError(f"cannot read model roster {roster_path}: {exc}") from exc
    return [LlmConfig(**entry) for entry in entries]


def _select_models(names: str, roster: list[LlmConfig], mock: bool) -> list[LlmConfig]:
    if names == "all":
        return list(roster)
    by_name = {}
    for config in roster:
        by_name[config.model_id] = config
        if config.display_name:
            by_name[config.display_name] = config
    selected = []
    for name in [n.strip() for n in names.split(",") if n.strip()]:
        if name in by_name:
            selected.append(by_name[name])
        elif mock:
            selected.append(LlmConfig(model_id=name, endpoint_url="mock://local"))
        else:
            raise ConfigurationError(f"model {name!r} is not in the roster")
    return selected


def _parse_methods(spec: str) -> list[RepairMethod]:
    if spec == "all":
        return all_methods()
    methods = []
    for part in [p.strip() for p in spec.split(",") if p.strip()]:
        try:
            method = parse_method_key(part)
        except ValueError as exc:
            raise ConfigurationError(str(exc)) from exc
        if method is None:
            raise ConfigurationError("initial_solve is a phase, not a repair method")
        methods.append(method)
    return methods


def _dataset_kind(protocol: Protocol) -> str:
    return "hep" if protocol is Protocol.BUG_REPAIR else "mbpp"


def _resolve_dataset_file(kind: str, explicit: str | None, cache_dir: str) -> Path:
    if explicit:
        return Path(explicit)
    cached = Path(cache_dir) / DATASET_FILENAMES[kind]
    if not cached.is_file():
        raise ConfigurationError(
            f"no dataset file: pass --dataset-file or fetch into {cached}"
        )
    return cached


def _load_tasks(kind: str, path: Path, exclusions: str | None) -> list[RepairTask]:
    if kind == "hep":
        return load_humanevalpack(path)
    tasks = load_mbpp_test(path)
    exclusion_path = Path(exclusions) if exclusions else _packaged_path("mbpp_exclusions.txt")
    if exclusion_path.is_file():
        excluded = load_exclusions(exclusion_path)
        if excluded:
            tasks = apply_exclusions(tasks, excluded)
            logger.info("excluded %d tasks via %s", len(excluded), exclusion_path)
    return tasks


def _build_runner(args: argparse.Namespace) -> SubprocessRunner:
    shim = Path(args.shim) if args.shim else default_shim_path()
    if shim is None:
        raise ConfigurationError(
            "no execution shim found: install the exec-shim package or pass --shim"
        )
    return SubprocessRunner(
        shim_path=shim,
        timeout_seconds=args.timeout_secs,
        max_parallel=args.concurrency,
    )


def _build_provider(args: argparse.Namespace) -> Provider:
    if args.mock:
        return MockProvider.from_file(Path(args.mock), default=args.mock_default)
    return HttpProvider()


# ---- commands ----------------------------------------------------------


def cmd_fetch(args: argparse.Namespace) -> int:
    kind = args.dataset
    cache_dir = Path(args.cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    target = cache_dir / DATASET_FILENAMES[kind]
    if target.is_file():
        count = _verified_count(kind, target)
        print(f"cache hit: {target} ({count} records)")
        return 0
    url = DATASET_URLS[kind]
    logger.info("downloading %s", url)
    try:
        response = httpx.get(url, follow_redirects=True, timeout=120)
        response.raise_for_status()
    except httpx.HTTPError as exc:
        raise FetchError(f"download failed for {url}: {exc}") from exc
    with tempfile.NamedTemporaryFile(
        "wb", dir=cache_dir, suffix=".part", delete=False
    ) as handle:
        handle.write(response.content)
        temp_path = Path(handle.name)
    try:
        count = _verified_count(kind, temp_path)
    except HarnessError:
        temp_path.unlink(missing_ok=True)
        raise
    os.replace(temp_path, target)
    print(f"fetched: {target} ({count} records)")
    return 0


def _verified_count(kind: str, path: Path) -> int:
    try:
        if kind == "hep":
            count = len(load_humanevalpack(path))
            expected = HUMANEVALPACK_COUNT
        else:
            count = len(load_mbpp_test(path))
            expected = MBPP_TEST_COUNT
    except HarnessError as exc:
        raise FetchError(f"{path} failed verification: {exc}") from exc
    if count != expected:
        raise FetchError(f"{path}: expected {expected} records, found {count}")
    return count


def cmd_validate(args: argparse.Namespace, runner: TestRunner | None = None) -> int:
    kind = args.dataset
    path = _resolve_dataset_file(kind, args.dataset_file, args.cache_dir)
    tasks = _load_tasks(kind, path, args.exclusions)
    if runner is None:
        runner = _build_runner(args)
    report = validate_dataset(tasks, runner)
    output = report.to_ldjson()
    if args.out:
        Path(args.out).write_text(output, encoding="utf-8")
    else:
        sys.stdout.write(output)
    failures = report.failures()
    if args.update_exclusions:
        Path(args.update_exclusions).write_text(
            "".join(f"{task_id}\n" for task_id in failures), encoding="utf-8"
        )
    print(
        f"validated {len(tasks)} tasks: {len(tasks) - len(failures)} pass, "
        f"{len(failures)} fail",
        file=sys.stderr,
    )
    return 0


def cmd_run(
    args: argparse.Namespace,
    provider: Provider | None = None,
    runner: TestRunner | None = None,
) -> int:
    protocol = Protocol(args.protocol)
    kind = _dataset_kind(protocol)
    path = _resolve_dataset_file(kind, args.dataset_file, args.cache_dir)
    tasks = _load_tasks(kind, path, args.exclusions)

    roster = load_roster(Path(args.roster) if args.roster else None)
    models = _select_models(args.models, roster, mock=bool(args.mock))
    overrides = {
        "temperature": args.temperature,
        "top_p": args.top_p,
        "max_output_tokens": args.max_output_tokens,
        "timeout_seconds": args.request_timeout_secs,
        "max_retries": args.max_retries,
    }
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if overrides:
        models = [
            LlmConfig(**{**_config_dict(m), **overrides}) for m in models
        ]
    if not args.mock:
        for model in models:
            if model.api_key_env and not os.environ.get(model.api_key_env):
                raise ConfigurationError(
                    f"live mode needs {model.api_key_env} set for {model.model_id}"
                )
    methods = _parse_methods(args.methods)

    registry = None
    if args.templates:
        registry = load_template_overrides(
            Path(args.templates), allow_protected_overrides=args.allow_template_override
        )

    if provider is None:
        provider = _build_provider(args)
    if runner is None:
        runner = _build_runner(args)
    store = RunStore(Path(args.store_dir))
    pipeline = Pipeline(
        provider=provider,
        runner=runner,
        store=store,
        registry=registry,
        concurrency=args.concurrency,
    )
    options = {
        "timeout_secs": args.timeout_secs,
        "concurrency": args.concurrency,
        "mock": bool(args.mock),
        "mock_default": args.mock_default if args.mock else None,
        "templates": args.templates,
        "decoding_overrides": overrides,
    }
    run_id = pipeline.run_experiment(
        dataset=tasks,
        models=models,
        methods=methods,
        protocol=protocol,
        run_id=args.run_id,
        resume=args.resume,
        dataset_path=str(path),
        dataset_digest=sha256_file(path),
        options=options,
    )
    completed = len(store.completed_keys(run_id))
    print(f"run complete: {run_id} ({completed} records)")
    print(run_id)
    return 0


def _config_dict(config: LlmConfig) -> dict:
    return {
        "model_id": config.model_id,
        "endpoint_url": config.endpoint_url,
        "temperature": config.temperature,
        "top_p": config.top_p,
        "max_output_tokens": config.max_output_tokens,
        "timeout_seconds": config.timeout_seconds,
        "max_retries": config.max_retries,
        "api_key_env": config.api_key_env,
        "display_name": config.display_name,
    }


def cmd_report(args: argparse.Namespace) -> int:
    store = RunStore(Path(args.store_dir))
    manifest = store.load_manifest(args.run_id)
    records = store.query(args.run_id)
    methods = [m for m in map(parse_method_key, manifest.methods) if m is not None]
    cells = aggregate(
        records,
        protocol=manifest.protocol,
        task_ids=manifest.task_ids,
        model_ids=manifest.model_ids,
        methods=methods,
        allow_partial=args.partial,
    )
    document = render_report(cells, format=args.format)
    if args.out:
        Path(args.out).write_text(document, encoding="utf-8")
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(document)
    return 0


def cmd_cases(args: argparse.Namespace) -> int:
    store = RunStore(Path(args.store_dir))
    manifest = store.load_manifest(args.run_id)
    if manifest.protocol is not Protocol.BUG_REPAIR:
        raise UnsupportedProtocolError(
            "case analysis is defined for bug-repair runs only"
        )
    path = _resolve_dataset_file("hep", args.dataset_file, args.cache_dir)
    tasks = load_humanevalpack(path)
    bug_types = {t.id: t.bug_type or "unknown" for t in tasks}
    records = store.query(args.run_id, phase=Phase.REPAIR)
    report = case_analysis(records, bug_types, scope=CaseScope(args.scope))
    output = report.to_ldjson()
    if args.out:
        Path(args.out).write_text(output, encoding="utf-8")
    else:
        sys.stdout.write(output)
    tally = ", ".join(f"{k}: {v}" for k, v in report.tally.items())
    print(f"{report.case_count} cases ({tally})", file=sys.stderr)
    return 0


# ---- argument parsing ----------------------------------------------------


def _add_common_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--cache-dir", default="datasets", help="dataset cache directory")
    parser.add_argument("--dataset-file", help="explicit dataset file (skips cache)")
    parser.add_argument("--exclusions", help="task-id exclusion file (MBPP)")
    parser.add_argument("--shim", help="path to the execution shim script")
    parser.add_argument(
        "--timeout-secs", type=int, default=10, help="per-execution sandbox timeout"
    )
    parser.add_argument(
        "--concurrency", type=int, default=4, help="parallel tasks / sandbox processes"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="summary-repair",
        description="Benchmark harness for summary-mediated program repair",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    commands = parser.add_subparsers(dest="command", required=True)

    fetch = commands.add_parser("fetch", help="download and cache a benchmark")
    fetch.add_argument("dataset", choices=["hep", "mbpp"])
    fetch.add_argument("--cache-dir", default="datasets")
    fetch.set_defaults(func=cmd_fetch)

    validate = commands.add_parser("validate", help="run reference solutions")
    validate.add_argument("dataset", choices=["hep", "mbpp"])
    _add_common_run_flags(validate)
    validate.add_argument("--out", help="write the LDJSON report here")
    validate.add_argument(
        "--update-exclusions", help="write failing task ids to this file"
    )
    validate.set_defaults(func=cmd_validate)

    run = commands.add_parser("run", help="execute an experiment")
    run.add_argument(
        "--protocol", required=True, choices=[p.value for p in Protocol]
    )
    run.add_argument("--models", default="all", help="comma list of ids, or 'all'")
    run.add_argument(
        "--methods", default="all", help="'all' or comma list like direct,summary:error"
    )
    _add_common_run_flags(run)
    run.add_argument("--store-dir", default="runs", help="run store root")
    run.add_argument("--run-id", help="explicit id for a new run")
    run.add_argument("--resume", help="existing run id to continue")
    run.add_argument("--mock", help="mock provider fixtures (LDJSON)")
    run.add_argument("--mock-default", default="echo", choices=["echo", "error"])
    run.add_argument("--roster", help="alternative model roster JSON")
    run.add_argument("--templates", help="prompt template override JSON")
    run.add_argument("--allow-template-override", action="store_true")
    run.add_argument("--temperature", type=float)
    run.add_argument("--top-p", type=float, dest="top_p")
    run.add_argument("--max-output-tokens", type=int)
    run.add_argument("--max-retries", type=int)
    run.add_argument(
        "--request-timeout-secs", type=int, help="HTTP timeout per model call"
    )
    run.set_defaults(func=cmd_run)

    report = commands.add_parser("report", help="render tables from a run")
    report.add_argument("--run-id", required=True)
    report.add_argument("--store-dir", default="runs")
    report.add_argument("--format", default="markdown", choices=["markdown", "csv"])
    report.add_argument("--partial", action="store_true", help="allow incomplete runs")
    report.add_argument("--out")
    report.set_defaults(func=cmd_report)

    cases = commands.add_parser("cases", help="summary-only fix analysis")
    cases.add_argument("--run-id", required=True)
    cases.add_argument("--store-dir", default="runs")
    cases.add_argument("--scope", default="per-model", choices=[s.value for s in CaseScope])
    cases.add_argument("--cache-dir", default="datasets")
    cases.add_argument("--dataset-file")
    cases.add_argument("--out")
    cases.set_defaults(func=cmd_cases)

    return parser


def main(
    argv: list[str] | None = None,
    provider: Provider | None = None,
    runner: TestRunner | None = None,
) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.func is cmd_run:
            return cmd_run(args, provider=provider, runner=runner)
        if args.func is cmd_validate:
            return cmd_validate(args, runner=runner)
        return args.func(args)
    except HarnessError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
