#!/usr/bin/env python3
"""Writes data/corpus.jsonl: math prompts (~400 output tokens) and code prompts (~900)."""
import json
import random
import sys

MATH_OPEN = ["Solve", "Compute", "Evaluate", "Prove", "Find", "Simplify", "Determine", "Calculate"]
MATH_OBJ = ["the equation {a}x + {b} = {c}", "the integral of x^{a} from 0 to {b}",
            "the roots of x^2 - {a}x + {b}", "the probability of {a} heads in {b} coin tosses"]
MATH_TAIL = ["and show every step.", "using algebra.", "and explain the theorem used.",
             "with a rigorous proof.", "and check the answer numerically.", "step by step."]
CODE_OPEN = ["Write", "Implement", "Refactor", "Debug", "Optimize", "Design", "Create", "Review"]
CODE_OBJ = ["a Python function that parses {a} JSON files",
            "a C++ class for a thread-safe queue of {a} items",
            "a REST API handler in Go with {a} routes", "a SQL query joining {a} tables"]
CODE_TAIL = ["and include unit tests.", "with error handling and logging.",
             "and document the public API.", "using idiomatic code.",
             "and explain the complexity.", "with type annotations."]


def main():
    per_domain = int(sys.argv[1]) if len(sys.argv) > 1 else 120
    out = sys.argv[2] if len(sys.argv) > 2 else "data/corpus.jsonl"
    rng = random.Random(11)

    def fill(s):
        return s.format(a=rng.randint(2, 40), b=rng.randint(2, 40), c=rng.randint(2, 40))

    rows = []
    for _ in range(per_domain):
        rows.append({"text": f"{rng.choice(MATH_OPEN)} {fill(rng.choice(MATH_OBJ))} {rng.choice(MATH_TAIL)}",
                     "output_length": max(50, round(rng.gauss(400, 40)))})
        rows.append({"text": f"{rng.choice(CODE_OPEN)} {fill(rng.choice(CODE_OBJ))} {rng.choice(CODE_TAIL)}",
                     "output_length": max(50, round(rng.gauss(900, 80)))})
    with open(out, "w") as f:
        for r in rows:
            f.write(json.dumps(r) + "\n")


if __name__ == "__main__":
    main()
