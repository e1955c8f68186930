"""Command-line entry point: ``drastoch <mode> [--config PATH] [flags]``.

Each command writes ``<out>/<mode>-<hash8>/`` holding ``results.csv``,
``raw.jsonl`` and ``meta.json``. The directory name comes from the config
hash, so rerunning an identical config is refused instead of overwriting.
"""

import argparse
import json
import logging
import os
import shutil
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .. import mitigation as mit
from .. import sim
from ..canonical import EquivalenceOracle, answer_space, build_vectors, cluster_citations, cluster_findings
from ..decomposition import decompose_exact, decompose_mc
from ..errors import ConfigError, DrastochError
from ..extraction import JudgeTransport, MockJudge, extract_runs, load_reports
from ..extraction.prompts import template_versions
from ..metrics import tv_result
from . import config as config_mod
from .tables import METRIC_COLUMNS, ResultsTable, mean

log = logging.getLogger("drastoch")

CORPUS_ROW = "corpus"
DECOMPOSITION_COLUMNS = (
    "tv_total", "tv_propagated", "tv_intrinsic",
    "delta_query", "delta_sum", "delta_update", "residual",
)
TV_LEVELS = ("tv_answer", "tv_finding", "tv_citation")
FIXTURES = ("table1", "table2", "table3", "table_c3")


@dataclass
class CommandResult:
    table: ResultsTable
    raw: list = field(default_factory=list)
    warnings: list = field(default_factory=list)


class OutputExists(DrastochError, FileExistsError):
    pass


# -- evaluate ---------------------------------------------------------------

def make_judge(settings):
    if settings.use_mock():
        return MockJudge()
    return JudgeTransport(settings.endpoint, settings.model, timeout=settings.timeout,
                          max_retries=settings.max_retries, max_in_flight=settings.max_in_flight)


def _oracle(kind, judge):
    if kind == "judge":
        return EquivalenceOracle.judge_backed(judge)
    return EquivalenceOracle.normalized() if kind == "normalized" else EquivalenceOracle.exact()


def question_row(artifacts, oracle):
    """Metric columns for one question from its extracted runs."""
    answers = build_vectors(answer_space([a.answer for a in artifacts], oracle))
    findings = build_vectors(cluster_findings([a.findings for a in artifacts], oracle))
    cites = build_vectors(cluster_citations([a.citations for a in artifacts]))
    ans, fin, cit = tv_result(answers), tv_result(findings), tv_result(cites)
    acc = [a.accuracy for a in artifacts if a.accuracy is not None]
    return {
        "tv_answer": ans.tv,
        "tv_finding": fin.tv,
        "tv_citation": cit.tv,
        "support_tv_finding": fin.support_tv,
        "support_tv_citation": cit.support_tv,
        "mean_findings": fin.mean_support,
        "mean_citations": cit.mean_support,
        "accuracy": float(np.mean(acc)) if acc else None,
    }


def group_reports(records):
    """Records grouped by question id, in order of first appearance."""
    groups = {}
    for r in records:
        groups.setdefault(r.question_id, []).append(r)
    return groups


def cmd_evaluate(cfg, judge=None):
    judge = judge or make_judge(cfg.judge)
    groups = group_reports(load_reports(cfg.reports))
    warnings, ready = [], []
    for qid, recs in groups.items():
        if len(recs) < 2:
            msg = f"question {qid}: {len(recs)} run(s), need at least 2; skipped"
            log.warning(msg)
            warnings.append({"question_id": qid, "warning": msg})
        else:
            ready.append((qid, recs))

    def work(item):
        qid, recs = item
        arts = extract_runs(recs, judge, max_in_flight=1)
        return qid, arts, question_row(arts, _oracle(cfg.oracle, judge))

    workers = max(1, min(cfg.judge.max_in_flight, len(ready)))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        done = list(pool.map(work, ready))

    table = ResultsTable(("question_id",))
    raw = []
    for qid, arts, row in done:
        table.add({"question_id": qid}, row)
        raw.extend(a.to_dict() for a in arts)
    if table.rows:
        table.add({"question_id": CORPUS_ROW},
                  {c: mean(table.column(c)) for c in METRIC_COLUMNS})
    return CommandResult(table, raw, warnings)


# -- simulator modes --------------------------------------------------------

def _records(world, batch, **tags):
    out = []
    for rec in sim.to_records(world, batch):
        d = dict(tags)
        d.update(rec.to_dict())
        out.append(d)
    return out


def cmd_simulate(cfg):
    world, policy = cfg.resolved_world(), cfg.resolved_policy()
    batch = sim.simulate_ensemble(world, policy, cfg.n_runs, cfg.seed)
    table = ResultsTable(("world",))
    table.add({"world": world.name or "custom"}, sim.metrics_row(world, batch))
    return CommandResult(table, _records(world, batch))


def cmd_ablate(cfg):
    world, policy = cfg.resolved_world(), cfg.resolved_policy()
    table = ResultsTable(("lambda", "step", "module"))
    raw = []
    for lam in cfg.lambdas:
        for st in cfg.steps:
            for mod in cfg.modules:
                cell = policy.cell(mod, st, lam, world.horizon)
                batch = sim.simulate_ensemble(world, cell, cfg.n_runs, cfg.seed)
                keys = {"lambda": repr(float(lam)), "step": str(st), "module": sim.Module(mod).value}
                table.add(keys, sim.metrics_row(world, batch))
                raw.extend(_records(world, batch, **keys))
    return CommandResult(table, raw)


def cmd_decompose(cfg):
    world, policy = cfg.resolved_world(), cfg.resolved_policy()
    if cfg.method == "exact":
        rep = decompose_exact(world, policy, cfg.step)
    else:
        rep = decompose_mc(world, policy, cfg.step, cfg.n_outer, cfg.n_inner, seed=cfg.seed)
    d = rep.to_dict()
    table = ResultsTable(("step", "method"), DECOMPOSITION_COLUMNS)
    table.add({"step": rep.step, "method": d["method"]}, d)
    return CommandResult(table, [d])


def cmd_mitigate(cfg):
    world = cfg.resolved_world()
    lam = cfg.mitigation_lambda
    policy = cfg.resolved_policy().with_temperatures(
        {m.value: [lam] * world.horizon for m in sim.Module})
    m = mit.Mitigation(structured=cfg.structured, ensemble=cfg.ensemble, gamma=cfg.gamma,
                       schedule=mit.EnsembleSchedule(cfg.n0))
    sizes = m.sizes(world.horizon)
    mit._check_capacity(policy, sizes)
    seeds = sim.run_seeds(cfg.seed, cfg.n_runs)
    u = sim.draw_uniforms(world, policy, seeds)
    base = sim.simulate(world, policy, u, seeds=seeds)
    treated = sim.simulate(world, policy, u, sizes, m.effective_gamma(), seeds)
    table = ResultsTable(("method",), METRIC_COLUMNS + ("avg_tv",))
    raw = []
    for name, batch in (("baseline", base), ("mitigated", treated)):
        row = sim.metrics_row(world, batch)
        row["avg_tv"] = mit.average_tv(row)
        table.add({"method": name}, row)
        raw.extend(_records(world, batch, method=name))
    return CommandResult(table, raw)


# -- aggregate --------------------------------------------------------------

def load_table(source):
    """A results table from a path or a shipped ``fixture:<name>``."""
    if source.startswith(config_mod.FIXTURE_PREFIX):
        name = source[len(config_mod.FIXTURE_PREFIX):]
        if name not in FIXTURES:
            raise ConfigError("input", f"unknown fixture {name!r}; known: {', '.join(FIXTURES)}")
        text = resources.files(__package__).joinpath("fixtures", f"{name}.csv").read_text("utf-8")
        return ResultsTable.from_csv(text)
    return ResultsTable.read(source)


def aggregate_table(table, group_by=()):
    """Grouped column means; ``avg_tv`` is added when all three TV levels exist.

    With no ``group_by`` every row lands in one group named ``all``.
    """
    group_by = tuple(group_by)
    bad = [g for g in group_by if g not in table.key_columns]
    if bad:
        raise ConfigError("group_by", f"unknown key {bad[0]!r}; valid keys: {', '.join(table.key_columns)}")
    values = tuple(table.value_columns)
    with_avg = all(c in values for c in TV_LEVELS)
    out = ResultsTable(group_by or ("group",), values + (("avg_tv",) if with_avg else ()))
    groups = {}
    for r in table.rows:
        key = tuple(r[g] for g in group_by) if group_by else ("all",)
        groups.setdefault(key, []).append(r)
    for key, rows in groups.items():
        row = {c: mean([r[c] for r in rows]) for c in values}
        if with_avg:
            row["avg_tv"] = mean([row[c] for c in TV_LEVELS])
        out.add(dict(zip(out.key_columns, key)), row)
    return out


def cmd_aggregate(cfg):
    return CommandResult(aggregate_table(load_table(cfg.input), cfg.group_by))


COMMANDS = {
    "evaluate": cmd_evaluate,
    "simulate": cmd_simulate,
    "ablate": cmd_ablate,
    "decompose": cmd_decompose,
    "mitigate": cmd_mitigate,
    "aggregate": cmd_aggregate,
}


# -- output -----------------------------------------------------------------

def output_dir(cfg):
    return os.path.join(cfg.out, f"{cfg.mode}-{cfg.config_hash()[:8]}")


def metadata(cfg, result):
    judged = cfg.mode == "evaluate"
    return {
        "config_hash": cfg.config_hash(),
        "seed": cfg.seed,
        "mode": cfg.mode,
        "config": cfg.hashable(),
        "columns": list(result.table.columns),
        "template_versions": template_versions() if judged else None,
        "judge_deterministic": cfg.judge.use_mock() if judged else None,
        "deterministic": cfg.judge.use_mock() if judged else True,
        "warnings": result.warnings,
    }


def write_outputs(cfg, result):
    """Write into a temporary sibling and rename, so a directory that exists
    is always complete. Refuses to replace an existing run."""
    dest = output_dir(cfg)
    if os.path.exists(dest):
        raise OutputExists(f"{dest} already exists; refusing to overwrite")
    os.makedirs(cfg.out, exist_ok=True)
    tmp = tempfile.mkdtemp(prefix=".partial-", dir=cfg.out)
    try:
        result.table.write(os.path.join(tmp, "results.csv"))
        h = cfg.config_hash()
        with open(os.path.join(tmp, "raw.jsonl"), "w", encoding="utf-8") as fh:
            for rec in result.raw:
                line = dict(rec, config_hash=h)
                fh.write(json.dumps(line, sort_keys=True, ensure_ascii=False) + "\n")
        with open(os.path.join(tmp, "meta.json"), "w", encoding="utf-8") as fh:
            json.dump(metadata(cfg, result), fh, sort_keys=True, indent=2)
            fh.write("\n")
        os.rename(tmp, dest)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    return dest


def run(cfg, judge=None):
    """Execute ``cfg`` and persist it; returns (output directory, result)."""
    fn = COMMANDS[cfg.mode]
    result = fn(cfg, judge) if cfg.mode == "evaluate" else fn(cfg)
    return write_outputs(cfg, result), result


# -- argument parsing -------------------------------------------------------

def _common(p):
    p.add_argument("--config", help="JSON run config")
    p.add_argument("--seed", type=int, help="base seed (unsigned 64-bit)")
    p.add_argument("--runs", type=int, dest="n_runs", help="runs per question or grid cell")
    p.add_argument("--out", help="output root directory (default: results)")
    p.add_argument("--judge-endpoint", dest="judge_endpoint",
                   help="chat-completion URL; token read from DRASTOCH_JUDGE_TOKEN")


def build_parser():
    parser = argparse.ArgumentParser(prog="drastoch", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="mode", required=True)

    p = sub.add_parser("evaluate", help="metrics for multi-run reports")
    _common(p)
    p.add_argument("reports", nargs="?", help="report lines file (one JSON record per run)")
    p.add_argument("--oracle", choices=config_mod.ORACLES)

    p = sub.add_parser("simulate", help="one simulated ensemble")
    _common(p)

    p = sub.add_parser("ablate", help="temperature ablation grid")
    _common(p)

    p = sub.add_parser("decompose", help="per-step variance decomposition")
    _common(p)
    p.add_argument("--step", type=int)
    p.add_argument("--method", choices=("exact", "mc"))
    p.add_argument("--n-outer", type=int, dest="n_outer")
    p.add_argument("--n-inner", type=int, dest="n_inner")

    p = sub.add_parser("mitigate", help="baseline vs mitigated on shared randomness")
    _common(p)
    p.add_argument("--gamma", type=float)
    p.add_argument("--n0", type=int)

    p = sub.add_parser("aggregate", help="grouped means of a results table")
    _common(p)
    p.add_argument("input", nargs="?", help="results.csv path or fixture:<name>")
    p.add_argument("--group-by", dest="group_by", help="comma-separated key columns")
    return parser


_OVERRIDES = ("seed", "n_runs", "out", "judge_endpoint", "reports", "oracle", "step", "method",
              "n_outer", "n_inner", "gamma", "n0", "input", "group_by")


def config_from_args(args):
    overrides = {k: getattr(args, k, None) for k in _OVERRIDES}
    if overrides["group_by"] is not None:
        overrides["group_by"] = [g.strip() for g in overrides["group_by"].split(",") if g.strip()]
    return config_mod.load(args.config, args.mode, overrides)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = config_from_args(args)
        dest, result = run(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OutputExists as exc:
        print(str(exc), file=sys.stderr)
        return 3
    except DrastochError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    sys.stdout.write(result.table.to_csv())
    print(f"wrote {dest}", file=sys.stderr)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
