"""Pure-Python spectrum and ranking oracles."""
import math


def counts(traces, statement_count):
    """traces: iterable of (sequence, failing: bool)."""
    ef = [0] * statement_count
    ep = [0] * statement_count
    F = P = 0
    for seq, failing in traces:
        for s in set(seq):
            if failing:
                ef[s - 1] += 1
            else:
                ep[s - 1] += 1
        F += failing
        P += not failing
    return ef, ep, F, P


def ochiai(ef, ep, F, P):
    if ef == 0:
        return 0.0
    return ef / math.sqrt(F * (ef + ep))


def tarantula(ef, ep, F, P):
    if ef == 0:
        return 0.0
    fr = ef / F
    pr = ep / P if P else 0.0
    return fr / (fr + pr)


FORMULAS = {"ochiai": ochiai, "tarantula": tarantula}


def scores(traces, statement_count, formula="ochiai"):
    ef, ep, F, P = counts(traces, statement_count)
    return [FORMULAS[formula](ef[i], ep[i], F, P) for i in range(statement_count)]


def sort_and_scan(scores, faulty, tie):
    """Walk statements in descending score order; ties form one rank group."""
    order = sorted(range(len(scores)), key=lambda i: -scores[i])
    target = max(scores[s - 1] for s in faulty)
    positions = [pos for pos, i in enumerate(order, start=1) if abs(scores[i] - target) <= 1e-12]
    if tie == "worst":
        examined = positions[-1]
    elif tie == "best":
        examined = positions[0]
    else:
        examined = (positions[0] + positions[-1]) / 2
    return examined / len(scores)
