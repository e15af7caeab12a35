#!/usr/bin/env python3
"""Build and verify a small end-to-end demo problem.

A two-state process where a logistic model's output is the probability of
staying in the healthy state; rewards and the initial distribution are
fixed.  Writes the problem + model files and runs both senses.
"""

import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from chainbound.markov import (
    FeatureSet,
    MarkovProcessSpec,
    ParameterLink,
    PropertyQuery,
    QueryKind,
    QuerySense,
)
from chainbound.models import ModelArtifact, save_model
from chainbound.probfile import save_problem
from chainbound.verifier import verify


def main() -> int:
    out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_problem")
    out.mkdir(parents=True, exist_ok=True)

    stay = ModelArtifact("LogisticRegression", 1, W=[[0.8, -0.5]], b=[0.3])
    # P = [[p, 1-p], [0, 1]] with p = model output; r and pi fixed.
    A_P = np.array([[1.0], [-1.0], [0.0], [0.0]])
    b_P = np.array([0.0, 1.0, 0.0, 1.0])
    spec = MarkovProcessSpec(
        n_states=2,
        m_features=2,
        query=PropertyQuery(QueryKind.TOTAL_REWARD, QuerySense.MAX),
        feature_set=FeatureSet.single_box([-1.0, -1.0], [1.0, 1.0]),
        links={
            "pi": ParameterLink("pi", np.zeros((2, 1)), [1.0, 0.0]),
            "P": ParameterLink("P", A_P, b_P),
            "r": ParameterLink("r", np.zeros((2, 1)), [1.0, 0.0]),
        },
        models=[stay],
        discount=0.9,
        absorbing_states=(1,),
    )
    save_model(stay, out / "stay_model.json")
    save_problem(spec, out / "problem.json", model_refs=["stay_model.json"])
    print(f"wrote {out}/problem.json")

    for sense in (QuerySense.MAX, QuerySense.MIN):
        spec.query = PropertyQuery(QueryKind.TOTAL_REWARD, sense)
        res = verify(spec)
        print(
            f"{sense.value}: {res.status}, value {res.value:.6f}, "
            f"witness {np.round(res.witness, 4)}"
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
