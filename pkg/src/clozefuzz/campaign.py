"""Campaign orchestration: the sample-mask-infill-compile-triage loop.

One seed is processed end to end before the next is drawn, so a fixed
rng seed makes the whole run reproducible. An optional parallel mode
fans the compile step out over threads while keeping result order, so
counts stay stable either way.
"""

from __future__ import annotations

import json
import logging
import random
import shlex
import time
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import Corpus, CorpusError, load_corpus, preflight_filter
from .harness import (
    CompilerConfig,
    HarnessError,
    compile_program,
    ensure_compiler,
    time_passes,
)
from .infill import BackendError, InfillConfig, InfillResult, infill
from .masking import cloze, render
from .oracle import (
    HANG_TAIL_LENGTH,
    BugKind,
    BugSignature,
    BugStore,
    BugStoreError,
    Novelty,
    classify,
    signature,
)

logger = logging.getLogger(__name__)


class ConfigError(Exception):
    """Bad campaign configuration; nothing was run."""


class CampaignAbortedError(Exception):
    """Mid-run failure. The bug store journal survives for resumption."""

    def __init__(self, message: str, partial_report: "CampaignReport | None" = None):
        super().__init__(message)
        self.partial_report = partial_report


@dataclass
class CampaignConfig:
    corpus_dir: str | Path
    out_dir: str | Path
    compilers: list[CompilerConfig]
    infill: InfillConfig
    budget_candidates: int | None = None
    budget_seconds: float | None = None
    seed: int = 0
    workers: int = 1
    skip_preflight: bool = False
    oracle_patterns: dict | None = None
    hang_tail_length: int = HANG_TAIL_LENGTH

    def __post_init__(self) -> None:
        if not self.compilers:
            raise ConfigError("at least one compiler target is required")
        if self.budget_candidates is None and self.budget_seconds is None:
            raise ConfigError("set a candidate budget, a time budget, or both")
        if self.budget_candidates is not None and self.budget_candidates < 1:
            raise ConfigError("candidate budget must be positive")
        if self.budget_seconds is not None and self.budget_seconds <= 0:
            raise ConfigError("time budget must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if self.infill.backend is None:
            raise ConfigError("campaign needs a completion backend")


@dataclass
class CampaignReport:
    seed: int
    corpus_dir: str
    compilers: list[dict]
    backend_id: str
    budgets: dict
    generated_at: str = ""
    elapsed_seconds: float = 0.0
    budget_exhausted: str | None = None
    stalled: bool = False
    aborted: str | None = None
    corpus_size_initial: int = 0
    corpus_size_final: int = 0
    preflight_rejected: int = 0
    seeds_sampled: int = 0
    variants_masked: int = 0
    candidates_generated: int = 0
    candidates_compiled: int = 0
    outcomes: dict = field(
        default_factory=lambda: {"pass": 0, "reject": 0, "ice": 0, "hang": 0}
    )
    interesting: int = 0
    duplicate: int = 0
    infill_errors: int = 0
    bundles: list[str] = field(default_factory=list)
    per_seed: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "generated_at": self.generated_at,
            "elapsed_seconds": self.elapsed_seconds,
            "seed": self.seed,
            "corpus_dir": self.corpus_dir,
            "compilers": self.compilers,
            "backend_id": self.backend_id,
            "budgets": self.budgets,
            "budget_exhausted": self.budget_exhausted,
            "stalled": self.stalled,
            "aborted": self.aborted,
            "corpus_size_initial": self.corpus_size_initial,
            "corpus_size_final": self.corpus_size_final,
            "preflight_rejected": self.preflight_rejected,
            "seeds_sampled": self.seeds_sampled,
            "variants_masked": self.variants_masked,
            "candidates_generated": self.candidates_generated,
            "candidates_compiled": self.candidates_compiled,
            "outcomes": self.outcomes,
            "interesting": self.interesting,
            "duplicate": self.duplicate,
            "infill_errors": self.infill_errors,
            "bundles": self.bundles,
            "per_seed": self.per_seed,
        }

    def to_text(self) -> str:
        lines = [
            "campaign summary",
            f"  seeds sampled:        {self.seeds_sampled}",
            f"  variants masked:      {self.variants_masked}",
            f"  candidates generated: {self.candidates_generated}",
            f"  candidates compiled:  {self.candidates_compiled}",
            f"  pass:                 {self.outcomes['pass']}",
            f"  reject:               {self.outcomes['reject']}",
            f"  ice:                  {self.outcomes['ice']}",
            f"  hang:                 {self.outcomes['hang']}",
            f"  interesting (new):    {self.interesting}",
            f"  duplicates:           {self.duplicate}",
            f"  infill errors:        {self.infill_errors}",
            f"  elapsed seconds:      {self.elapsed_seconds:.2f}",
        ]
        if self.budget_exhausted:
            lines.append(f"  stopped by:           {self.budget_exhausted} budget")
        if self.stalled:
            lines.append("  stopped by:           stall (no fresh candidates)")
        if self.aborted:
            lines.append(f"  aborted:              {self.aborted}")
        for path in self.bundles:
            lines.append(f"  bundle: {path}")
        return "\n".join(lines) + "\n"

    def save(self, out_dir: str | Path) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(
            json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
        (out / "report.txt").write_text(self.to_text(), encoding="utf-8")


def _load_campaign_corpus(corpus_dir: str | Path) -> Corpus:
    root = Path(corpus_dir)
    if (root / "manifest.jsonl").is_file():
        return Corpus.open(root)
    return load_corpus([(root, "user-supplied")])


def report_bug(
    out_dir: Path,
    sig: BugSignature,
    result: InfillResult,
    outcome,
    target: CompilerConfig,
    corpus: Corpus,
    sentinel: str,
) -> Path:
    """Write a self-contained reproduction bundle for a fresh finding."""
    bundle = out_dir / "bugs" / sig.digest[:16]
    bundle.mkdir(parents=True, exist_ok=True)
    (bundle / "candidate.rs").write_text(result.candidate_text, encoding="utf-8")
    (bundle / "masked.txt").write_text(
        render(result.variant, sentinel), encoding="utf-8"
    )
    (bundle / "stderr.txt").write_text(outcome.stderr, encoding="utf-8")

    seed_lines = [f"seed_id: {result.variant.seed_id}"]
    try:
        entry = corpus.get(result.variant.seed_id)
        seed_lines.append(f"content_hash: {entry.content_hash}")
        seed_lines.append(f"provenance: {entry.provenance}")
    except KeyError:
        seed_lines.append("content_hash: unknown")
    (bundle / "seed-ref.txt").write_text("\n".join(seed_lines) + "\n", encoding="utf-8")

    (bundle / "signature.json").write_text(
        json.dumps(
            {
                "digest": sig.digest,
                "kind": sig.kind.value,
                "payload": sig.payload_dict(),
            },
            indent=2,
            sort_keys=True,
        )
        + "\n",
        encoding="utf-8",
    )

    cmd = [ensure_compiler(target), *target.extra_flags, "candidate.rs"]
    script = (
        "#!/bin/sh\n"
        'cd "$(dirname "$0")"\n'
        f"exec {shlex.join(cmd)}\n"
    )
    repro = bundle / "repro.sh"
    repro.write_text(script, encoding="utf-8")
    repro.chmod(0o755)
    return bundle


def run_campaign(cfg: CampaignConfig) -> CampaignReport:
    """Run the full loop until a budget is spent or progress stops.

    Fresh ICE and hang findings get a bundle on disk and feed back
    into the corpus under fuzzer-feedback provenance.
    """
    started = time.monotonic()
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    for target in cfg.compilers:
        ensure_compiler(target)

    corpus = _load_campaign_corpus(cfg.corpus_dir)
    initial_size = len(corpus)
    preflight_rejected = 0
    if not cfg.skip_preflight:
        for target in cfg.compilers:
            corpus = preflight_filter(corpus, target)
            preflight_rejected += len(corpus.preflight_rejections)
    if len(corpus) == 0:
        raise CorpusError("no usable seeds: corpus is empty after preflight")

    backend = cfg.infill.backend
    report = CampaignReport(
        seed=cfg.seed,
        corpus_dir=str(cfg.corpus_dir),
        compilers=[
            {
                "kind": t.kind,
                "binary": str(t.binary_path),
                "flags": list(t.extra_flags),
                "timeout_secs": t.timeout_secs,
            }
            for t in cfg.compilers
        ],
        backend_id=getattr(backend, "backend_id", "unknown"),
        budgets={
            "candidates": cfg.budget_candidates,
            "seconds": cfg.budget_seconds,
        },
        corpus_size_initial=initial_size,
        preflight_rejected=preflight_rejected,
    )

    rng = random.Random(cfg.seed)
    store = BugStore(out_dir / "bugstore")

    def spent() -> str | None:
        if (
            cfg.budget_candidates is not None
            and report.candidates_compiled >= cfg.budget_candidates
        ):
            return "candidates"
        if (
            cfg.budget_seconds is not None
            and time.monotonic() - started >= cfg.budget_seconds
        ):
            return "seconds"
        return None

    idle_limit = max(50, 4 * len(corpus))
    idle = 0

    def process_seed(entry) -> int:
        """Mask, infill, compile, and triage one seed. Returns the
        number of compiles performed."""
        stats = report.per_seed.setdefault(
            entry.id,
            {"sampled": 0, "variants": 0, "candidates": 0, "interesting": 0},
        )
        stats["sampled"] += 1
        variants = cloze(entry.source_text, entry.id)
        report.variants_masked += len(variants)
        stats["variants"] += len(variants)

        compiled = 0
        for variant in variants:
            if spent():
                break
            try:
                results = infill(variant, cfg.infill, rng)
            except BackendError as exc:
                report.infill_errors += 1
                logger.warning("infill failed: %s", exc)
                continue
            report.candidates_generated += len(results)
            stats["candidates"] += len(results)

            jobs = [
                (result, target)
                for result in results
                for target in cfg.compilers
            ]
            outcomes = _run_compiles(jobs, cfg, report, spent)
            compiled += len(outcomes)
            for (result, target), outcome in outcomes:
                kind = classify(outcome, target.kind, cfg.oracle_patterns)
                report.outcomes[kind.value] += 1
                if kind not in (BugKind.ICE, BugKind.HANG):
                    continue
                trace = (
                    time_passes(result.candidate_text, target)
                    if kind is BugKind.HANG
                    else None
                )
                sig = signature(outcome, kind, trace, cfg.hang_tail_length)
                novelty = store.record_if_new(sig, result.candidate_text)
                if novelty is Novelty.DUPLICATE:
                    report.duplicate += 1
                    continue
                report.interesting += 1
                stats["interesting"] += 1
                bundle = report_bug(
                    out_dir, sig, result, outcome, target, corpus,
                    backend.sentinel,
                )
                report.bundles.append(str(bundle.relative_to(out_dir)))
                corpus.add_entry(result.candidate_text, "fuzzer-feedback")
        return compiled

    def finalize() -> None:
        report.corpus_size_final = len(corpus)
        report.elapsed_seconds = time.monotonic() - started
        report.generated_at = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
        report.save(out_dir)

    while True:
        report.budget_exhausted = spent()
        if report.budget_exhausted:
            break
        if idle >= idle_limit:
            report.stalled = True
            logger.warning(
                "no fresh candidates in %d consecutive seed draws; stopping",
                idle,
            )
            break

        entry = corpus.sample(rng)
        report.seeds_sampled += 1
        try:
            compiled_this_seed = process_seed(entry)
        except HarnessError as exc:
            # compiler vanished mid-run: stop gracefully, keep findings
            report.aborted = f"compiler unavailable mid-run: {exc}"
            logger.error(report.aborted)
            break
        except (BugStoreError, OSError) as exc:
            try:
                finalize()
            except OSError:
                pass
            raise CampaignAbortedError(str(exc), partial_report=report) from exc
        idle = 0 if compiled_this_seed else idle + 1

    finalize()
    return report


def _run_compiles(jobs, cfg: CampaignConfig, report: CampaignReport, spent):
    """Compile (candidate, target) jobs, honoring both budgets.

    Jobs run in waves no wider than the worker count with a budget
    check before each wave, so a time budget can overshoot by at most
    one compile timeout. Returns [(job, outcome)] in job order either
    way, which keeps report counts independent of the worker count.
    """
    results = []
    remaining = list(jobs)
    while remaining:
        if spent():
            break
        allowed = len(remaining)
        if cfg.budget_candidates is not None:
            allowed = min(
                allowed, cfg.budget_candidates - report.candidates_compiled
            )
        if allowed <= 0:
            break
        wave_width = cfg.workers if cfg.workers > 1 else 1
        wave = remaining[: min(allowed, wave_width)]
        remaining = remaining[len(wave) :]
        if len(wave) > 1:
            from concurrent.futures import ThreadPoolExecutor

            with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
                outs = list(
                    pool.map(
                        lambda job: compile_program(job[0].candidate_text, job[1]),
                        wave,
                    )
                )
        else:
            outs = [compile_program(wave[0][0].candidate_text, wave[0][1])]
        report.candidates_compiled += len(outs)
        results.extend(zip(wave, outs))
    return results
