"""
normal_form_sizes.py
====================
Size of every predicate before and after normalization, as a table.

Columns:
  1. body_nodes         AST nodes of the predicate body
  2. fact_nodes         AST nodes of all facts (declared and derived)
  3. clauses            clauses in the normalized matrix
  4. special_formulas   special formulas across all clauses
  5. normal_nodes       expression nodes across all special formulas
  6. skolem_relations   relations introduced for existentials
  7. size_ratio         normal_nodes / (body_nodes + fact_nodes)

Output: data/reports/normal_form_sizes.csv and .json
"""

import json
import os
from datetime import datetime
from typing import Optional

import pandas as pd

from src.config.settings import REPORTS_DIR
from src.kernel.kernel_ast import Spec, expr_size, formula_size
from src.normalization.normalizer import normalize_predicate


def normal_form_sizes(spec: Spec) -> pd.DataFrame:
    facts = spec.all_facts()
    fact_nodes = sum(formula_size(f.body) for f in facts)
    rows = []
    for p in spec.predicates:
        np = normalize_predicate(p, facts)
        literals = [lit for clause in np.matrix for lit in clause.literals]
        body_nodes = formula_size(p.body)
        normal_nodes = sum(expr_size(e) for lit in literals for e in lit.exprs)
        rows.append({
            "predicate": p.name,
            "body_nodes": body_nodes,
            "fact_nodes": fact_nodes,
            "clauses": len(np.matrix),
            "special_formulas": len(literals),
            "normal_nodes": normal_nodes,
            "skolem_relations": len(np.skolem_decls),
            "size_ratio": round(normal_nodes / max(body_nodes + fact_nodes, 1), 3),
        })
    columns = ["predicate", "body_nodes", "fact_nodes", "clauses", "special_formulas",
               "normal_nodes", "skolem_relations", "size_ratio"]
    return pd.DataFrame(rows, columns=columns)


def run_normal_form_sizes(spec: Spec, report_dir: Optional[str] = None) -> pd.DataFrame:
    report_dir = report_dir or REPORTS_DIR
    print("=" * 60)
    print(f"📐 NORMAL FORM SIZES — {spec.file}")
    print("=" * 60)

    df = normal_form_sizes(spec)
    print(df.to_string(index=False) if not df.empty else "  (no predicates)")

    os.makedirs(report_dir, exist_ok=True)
    csv_path = os.path.join(report_dir, "normal_form_sizes.csv")
    json_path = os.path.join(report_dir, "normal_form_sizes.json")
    df.to_csv(csv_path, index=False)
    with open(json_path, "w", encoding="utf-8") as f:
        json.dump({
            "computed_at": datetime.now().isoformat(),
            "spec": spec.file,
            "predicates": df.to_dict(orient="records"),
        }, f, indent=2, default=str)

    print(f"\n💾 Saved → {csv_path}")
    print(f"💾 Saved → {json_path}")
    print("=" * 60)
    return df
