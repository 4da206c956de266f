"""
suite.py
========
Oracle suite: 7 automated checks of the normalizer and the executor against
the brute-force reference semantics, on the seeded random corpus.

    1  Soundness                 every committed post-state satisfies body and facts
    2  Completeness              closure-free corpus: no failure where a post-state exists
    3  Termination               no budget failures; log and rounds within their bounds
    4  Special-form equivalence  quantifier-free bodies agree with their clause matrix
    5  Skolem equisatisfiability existential bodies agree with some Skolem extension
    6  Two-course model          the gradebook model checks out as described
    7  Two evaluators            store evaluator and oracle agree on executor results

Outputs:
  - data/reports/oracle_suite_report.json  (detailed results per check)
  - data/reports/reproducers/check<N>-<seed>/ for every violation
  - Console summary with pass/fail status

Usage:
    python src/oracle/suite.py --count 200 --seed 42
"""

import argparse
import itertools
import json
import logging
import os
import sys
from dataclasses import dataclass, field, replace
from datetime import datetime
from typing import Any, Dict, List, Optional, Tuple

PROJECT_ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), "..", ".."))
if PROJECT_ROOT not in sys.path:
    sys.path.insert(0, PROJECT_ROOT)

from src.config.settings import REPORTS_DIR, SPECS_DIR, Settings, load_settings, setup_logging  # noqa: E402
from src.executor.executor import ExecutionResult, Executor, FailureKind, run_predicate  # noqa: E402
from src.kernel.errors import OracleOverflowError  # noqa: E402
from src.kernel.kernel_ast import Spec  # noqa: E402
from src.normalization.normalizer import NormalizedPredicate, normalize_predicate  # noqa: E402
from src.oracle.corpus import SEED, Case, course_slice, generate_cases, two_course_model  # noqa: E402
from src.oracle.oracle import (  # noqa: E402
    OracleConfig, OracleModel, OracleReport, Verdict, candidate_poststates, check_facts,
    enumerate_poststates, full_env, holds, matrix_holds, oracle_check, satisfies, write_reproducer,
)
from src.parsing.spec_parser import load_spec  # noqa: E402
from src.store.instance import Atom, Instance, Kind, RelationDecl  # noqa: E402

logger = logging.getLogger("specdb.oracle")

EQUIVALENCE_CASES = 50
SKOLEM_CASES = 50
MAX_SKOLEM_SLOTS = 4
# (A, B) universe sizes; every post-state and environment is enumerated
EQUIVALENCE_SIZES = (2, 2)
SKOLEM_SIZES = (2, 1)


@dataclass
class SuiteContext:
    settings: Settings
    cfg: OracleConfig
    count: int
    seed: int
    report_dir: str
    cases: Dict[Tuple[str, int], Case] = field(default_factory=dict)
    runs: Dict[Tuple[str, int], Tuple[NormalizedPredicate, ExecutionResult]] = field(default_factory=dict)
    reproducers: List[str] = field(default_factory=list)

    def corpus(self, name: str) -> List[Case]:
        """The ``general`` or ``closure_free`` corpus, generated once per run."""
        cached = [case for (corpus, _), case in self.cases.items() if corpus == name]
        if cached:
            return cached
        if name == "general":
            cases = generate_cases(self.count, self.seed, closure=True, quantifiers="any")
        else:
            cases = generate_cases(self.count, self.seed + 1, closure=False, quantifiers="any")
        for case in cases:
            self.cases[(name, case.seed)] = case
        return cases

    def execute(self, corpus: str, case: Case) -> Tuple[NormalizedPredicate, ExecutionResult]:
        key = (corpus, case.seed)
        if key not in self.runs:
            p = case.spec.predicate(case.pred)
            np = normalize_predicate(p, case.spec.all_facts())
            self.runs[key] = (np, run_predicate(np, case.env, case.instance, self.settings, trace=False))
        return self.runs[key]

    def reproduce(self, check_id: int, case: Case, report: OracleReport) -> str:
        path = os.path.join(self.report_dir, "reproducers", f"check{check_id}-{case.seed}")
        write_reproducer(path, case.spec, case.instance, case.pred, case.env, report)
        self.reproducers.append(path)
        return path


def _result(check_id: int, name: str, rule: str, checked: int, violations: List[Dict[str, Any]],
            skipped: int = 0) -> Dict[str, Any]:
    return {
        "check_id": check_id,
        "check_name": name,
        "rule": rule,
        "cases_checked": checked,
        "cases_skipped": skipped,
        "violations_found": len(violations),
        "status": "PASS" if not violations else "FAIL",
        "violation_details": violations,
    }


# ══════════════════════════════════════════════════════════════════════
# CORPORA
# ══════════════════════════════════════════════════════════════════════

def _environments(case: Case) -> List[Dict[str, Atom]]:
    """Every binding of the case's parameters over its universe."""
    p = case.spec.predicate(case.pred)
    names = sorted(case.env)
    domains = [case.instance.atoms(p.param_type(name)) for name in names]
    return [dict(zip(names, combo)) for combo in itertools.product(*domains)]


def _store_matrix(np: NormalizedPredicate, case: Case, witness: Instance, settings: Settings) -> bool:
    """The clause matrix on ``witness``, evaluated with the store's evaluator."""
    ex = Executor(np, case.env, case.instance, settings)
    ex.state.post = witness.copy()
    return ex.matrix_holds()


# ══════════════════════════════════════════════════════════════════════
# 7 ORACLE CHECKS
# ══════════════════════════════════════════════════════════════════════

def check_1_soundness(ctx: SuiteContext) -> Dict[str, Any]:
    """
    CHECK 1: Soundness
    Rule: executor success ⇒ (I, I') satisfies body and facts
    """
    violations = []
    cases = ctx.corpus("general")
    for case in cases:
        _, result = ctx.execute("general", case)
        if not result.ok:
            continue
        report = oracle_check(case.spec, case.pred, case.instance, case.env, result, ctx.cfg)
        if report.verdict == Verdict.SOUND_VIOLATION:
            violations.append({"seed": case.seed, "detail": report.detail,
                               "reproducer": ctx.reproduce(1, case, report)})
    return _result(1, "Soundness", "success ⇒ oracle accepts the post-state", len(cases), violations)


def check_2_completeness(ctx: SuiteContext) -> Dict[str, Any]:
    """
    CHECK 2: Completeness on closure-free specifications
    Rule: executor failure ⇒ no post-state exists
    """
    violations, skipped = [], 0
    cases = ctx.corpus("closure_free")
    for case in cases:
        _, result = ctx.execute("closure_free", case)
        if result.ok:
            continue
        try:
            report = oracle_check(case.spec, case.pred, case.instance, case.env, result, ctx.cfg)
        except OracleOverflowError as e:
            logger.warning(f"  skipped seed {case.seed}: {e}")
            skipped += 1
            continue
        if report.verdict == Verdict.COMPLETE_VIOLATION:
            violations.append({"seed": case.seed, "detail": report.detail,
                               "reproducer": ctx.reproduce(2, case, report)})
    return _result(2, "Completeness (closure-free)", "failure ⇒ oracle finds no post-state",
                   len(cases) - skipped, violations, skipped)


def check_3_termination(ctx: SuiteContext) -> Dict[str, Any]:
    """
    CHECK 3: Termination within bounds
    Rule: no budget failure; |log| ≤ 2 × mutable tuple space; rounds ≤ that bound + 2
    """
    violations = []
    for (corpus, seed), (np, result) in sorted(ctx.runs.items()):
        if result.failure is not None and result.failure.kind == FailureKind.BUDGET:
            violations.append({"corpus": corpus, "seed": seed, "detail": str(result.failure)})
            continue
        if result.witness is None:
            continue
        bound = 2 * result.witness.mutable_tuple_space()
        if len(result.updates) > bound or result.rounds > bound + 2:
            violations.append({"corpus": corpus, "seed": seed, "updates": len(result.updates),
                               "rounds": result.rounds, "bound": bound})
    return _result(3, "Termination", "no budget failure; log and rounds bounded",
                   len(ctx.runs), violations)


def check_4_special_form(ctx: SuiteContext) -> Dict[str, Any]:
    """
    CHECK 4: Special-form equivalence
    Rule: quantifier-free body ⇔ its clause matrix, on every (I', env) over 2-atom universes
    """
    violations = []
    cases = generate_cases(EQUIVALENCE_CASES, ctx.seed + 2, quantifiers="none", facts=False,
                           sizes=EQUIVALENCE_SIZES)
    for case in cases:
        p = case.spec.predicate(case.pred)
        np = normalize_predicate(p, [])
        mismatch = None
        for env, post in itertools.product(_environments(case),
                                           list(candidate_poststates(case.instance, ctx.cfg))):
            direct = satisfies(p.body, case.instance, post, full_env(case.spec, p, case.instance, env))
            normal = matrix_holds(np, case.instance, post, env)
            if direct != normal:
                mismatch = (env, post, direct, normal)
                break
        if mismatch is not None:
            env, post, direct, normal = mismatch
            report = OracleReport(Verdict.SOUND_VIOLATION, f"body={direct} matrix={normal}", post)
            violations.append({"seed": case.seed, "body": direct, "matrix": normal,
                               "reproducer": ctx.reproduce(4, replace(case, env=env), report)})
    return _result(4, "Special-form equivalence", "body ⇔ ⋀ clauses", len(cases), violations)


def _skolem_extensions(np: NormalizedPredicate, post: Instance) -> Optional[List[Instance]]:
    slots = []
    for decl in np.skolem_decls:
        for t in itertools.product(*(post.atoms(c) for c in decl.cols)):
            slots.append((decl.name, t))
    if len(slots) > MAX_SKOLEM_SLOTS:
        return None
    base = post.copy()
    for decl in np.skolem_decls:
        base.add_relation(RelationDecl(decl.name, decl.cols, Kind.SKOLEM))

    extensions = []
    for mask in range(2 ** len(slots)):
        ext = base.copy()
        for bit, (name, t) in enumerate(slots):
            if mask >> bit & 1:
                ext.relations[name].add(t)
        extensions.append(ext)
    return extensions


def check_5_skolem(ctx: SuiteContext) -> Dict[str, Any]:
    """
    CHECK 5: Skolem equisatisfiability
    Rule: existential body holds ⇔ some Skolem extension satisfies the universal matrix,
          on every (I', env) over the case universe
    """
    violations, skipped = [], 0
    cases = generate_cases(SKOLEM_CASES, ctx.seed + 3, quantifiers="any", facts=False,
                           existential=True, sizes=SKOLEM_SIZES)
    for case in cases:
        p = case.spec.predicate(case.pred)
        np = normalize_predicate(p, [])
        if _skolem_extensions(np, case.instance) is None:
            skipped += 1
            continue
        mismatch = None
        for post in candidate_poststates(case.instance, ctx.cfg):
            exts = _skolem_extensions(np, post)
            for env in _environments(case):
                direct = satisfies(p.body, case.instance, post, full_env(case.spec, p, case.instance, env))
                skolem = any(matrix_holds(np, case.instance, ext, env) for ext in exts)
                if direct != skolem:
                    mismatch = (env, post, direct, skolem)
                    break
            if mismatch is not None:
                break
        if mismatch is not None:
            env, post, direct, skolem = mismatch
            report = OracleReport(Verdict.SOUND_VIOLATION, f"body={direct} skolem={skolem}", post)
            violations.append({"seed": case.seed, "body": direct, "skolem": skolem,
                               "reproducer": ctx.reproduce(5, replace(case, env=env), report)})
    return _result(5, "Skolem equisatisfiability", "∃-body ⇔ ∃ Skolem extension ⊨ matrix",
                   len(cases) - skipped, violations, skipped)


def submit_for_pair_bindings(spec: Spec, model: Instance) -> List[Dict[str, Atom]]:
    """Bindings under which SubmitForPair's body holds on the two-course model."""
    m = OracleModel.single(model)
    submit = spec.predicate("SubmitForPair")
    courses, students = model.atoms("Course"), model.atoms("Student")
    found = []
    for c, c2, s1, s2, b in itertools.product(courses, courses, students, students,
                                              model.atoms("Submission")):
        env = {"c": c, "c'": c2, "s1": s1, "s2": s2, "bNew": b}
        if holds(submit.body, m, env):
            found.append(env)
    return found


def check_6_two_course_model(ctx: SuiteContext) -> Dict[str, Any]:
    """
    CHECK 6: The two-course gradebook model
    Rule: Enroll holds under (c0, c1, Meg); SubmitForPair holds under no binding with
          distinct courses; the model satisfies every fact; Drop(Meg) on c1 admits both
          the minimal and the emptied roster
    """
    spec = load_spec(os.path.join(SPECS_DIR, "gradebook.spec"))
    model, a = two_course_model(spec)
    m = OracleModel.single(model)
    violations = []

    enroll = spec.predicate("Enroll")
    if not holds(enroll.body, m, {"c": a["c0"], "c'": a["c1"], "sNew": a["Meg"]}):
        violations.append({"claim": "Enroll(c0, c1, Meg) holds"})

    # c = c' with a pair submission already in c.work leaves the model unchanged
    for env in submit_for_pair_bindings(spec, model):
        if env["c"] != env["c'"]:
            violations.append({"claim": "SubmitForPair holds under no binding with c != c'",
                               "binding": {k: v.label for k, v in env.items()}})
            break

    broken = check_facts(spec, model)
    if broken:
        violations.append({"claim": "model satisfies the facts", "violated": broken})

    c1 = course_slice(model, spec, "c1")
    grades = OracleConfig(max(ctx.cfg.max_atoms, 4), ctx.cfg.enumeration_cap)
    posts = enumerate_poststates(spec, "Drop", c1, {"s": a["Meg"]}, grades)
    rosters = [{t[1].label for t in post.relations["roster"]} for post in posts]
    if {"Harry"} not in rosters or set() not in rosters:
        violations.append({"claim": "Drop(Meg) admits {Harry} and the empty roster",
                           "rosters": sorted(map(sorted, rosters))})
    return _result(6, "Two-course model", "model checks as described", 4, violations)


def check_7_two_evaluators(ctx: SuiteContext) -> Dict[str, Any]:
    """
    CHECK 7: Two-evaluator cross-check
    Rule: on every executor result, store evaluator and oracle evaluator both accept the matrix
    """
    violations, checked = [], 0
    for key, (np, result) in sorted(ctx.runs.items()):
        if not result.ok:
            continue
        checked += 1
        case = ctx.cases[key]
        store = _store_matrix(np, case, result.witness, ctx.settings)
        oracle = matrix_holds(np, case.instance, result.witness, case.env)
        if not (store and oracle):
            violations.append({"corpus": key[0], "seed": key[1], "store": store, "oracle": oracle})
    return _result(7, "Two evaluators", "store and oracle evaluators agree", checked, violations)


# ══════════════════════════════════════════════════════════════════════
# MAIN: run all 7 checks and generate report
# ══════════════════════════════════════════════════════════════════════

ALL_CHECKS = [
    check_1_soundness,
    check_2_completeness,
    check_3_termination,
    check_4_special_form,
    check_5_skolem,
    check_6_two_course_model,
    check_7_two_evaluators,
]


def run_suite(count: int = 200, seed: int = SEED, report_dir: str = REPORTS_DIR,
              settings: Optional[Settings] = None) -> Dict[str, Any]:
    """Run all 7 oracle checks and save the report."""
    settings = settings or load_settings()
    ctx = SuiteContext(settings, OracleConfig.from_settings(settings), count, seed, report_dir)

    print("=" * 60)
    print(f"🔍 ORACLE SUITE — {len(ALL_CHECKS)} checks, {count} cases per corpus, seed {seed}")
    print("=" * 60)
    results = []
    for check_fn in ALL_CHECKS:
        result = check_fn(ctx)
        results.append(result)
        status_icon = "✅" if result["status"] == "PASS" else "❌"
        print(
            f"  {status_icon} Check {result['check_id']}: {result['check_name']}"
            f"  → {result['status']}"
            f"  ({result['cases_checked']} cases, {result['violations_found']} issues)"
        )

    passed = sum(1 for r in results if r["status"] == "PASS")
    failed = len(results) - passed
    total_violations = sum(r["violations_found"] for r in results)
    report = {
        "report_timestamp": datetime.now().isoformat(),
        "summary": {
            "total_checks": len(results),
            "passed": passed,
            "failed": failed,
            "total_violations": total_violations,
            "overall_status": "HEALTHY" if failed == 0 else "ISSUES_DETECTED",
        },
        "corpus": {"count": count, "seed": seed},
        "reproducers": ctx.reproducers,
        "check_results": results,
    }

    os.makedirs(report_dir, exist_ok=True)
    report_path = os.path.join(report_dir, "oracle_suite_report.json")
    with open(report_path, "w", encoding="utf-8") as f:
        json.dump(report, f, indent=2, default=str)

    print(f"\n{'=' * 60}")
    print(f"📊 SUMMARY: {passed}/{len(results)} checks passed, {failed} failed")
    print(f"   Total violations: {total_violations}")
    print(f"   Status: {'🟢 HEALTHY' if failed == 0 else '🔴 ISSUES DETECTED'}")
    print(f"   Report: {report_path}")
    print(f"{'=' * 60}")
    return report


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description="Run the oracle suite")
    parser.add_argument("--count", type=int, default=200)
    parser.add_argument("--seed", type=int, default=SEED)
    args = parser.parse_args()
    setup_logging("oracle", load_settings().log_level)
    report = run_suite(args.count, args.seed)
    sys.exit(0 if report["summary"]["overall_status"] == "HEALTHY" else 1)
