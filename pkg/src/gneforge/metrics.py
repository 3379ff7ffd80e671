"""Per-iteration metrics traces and their deterministic CSV form.

Trace rows hold (index, rel_dist_to_opt, disagreement, violation, kkt_primal,
kkt_dual).  The CSV writer renders floats with repr (shortest round-trip
form), so identical runs produce byte-identical files; there is deliberately
no timing column here — wall-clock numbers live in run summaries instead,
where reproducibility is not expected.
"""

import numpy as np

TRACE_FIELDS = ("rel_dist_to_opt", "disagreement", "violation",
                "kkt_primal", "kkt_dual")


class MetricsTrace:
    """Append-only table of convergence metrics.

    Parameters
    ----------
    index_name : str
        Name of the first column: "iter" for synchronous solvers, "epoch"
        for asynchronous ones.
    """

    def __init__(self, index_name="iter"):
        self.index_name = index_name
        self.rows = []

    def append(self, index, rel_dist, residual):
        """Add a row from an index, a relative distance and a KktResidual."""
        self.rows.append((int(index), float(rel_dist), residual.disagreement,
                          residual.violation, residual.primal, residual.dual))

    def __len__(self):
        return len(self.rows)

    def column(self, name):
        names = (self.index_name,) + TRACE_FIELDS
        j = names.index(name)
        return np.array([row[j] for row in self.rows])

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write(",".join((self.index_name,) + TRACE_FIELDS) + "\n")
            for row in self.rows:
                fh.write(str(row[0]) + "," +
                         ",".join(repr(v) for v in row[1:]) + "\n")

    @classmethod
    def from_csv(cls, path):
        with open(path) as fh:
            header = fh.readline().strip().split(",")
            trace = cls(index_name=header[0])
            for line in fh:
                parts = line.strip().split(",")
                trace.rows.append((int(parts[0]),) +
                                  tuple(float(p) for p in parts[1:]))
        return trace


def relative_distance(x, x_star):
    """||x - x*|| / ||x*||, or nan when the reference point is unknown."""
    if x_star is None:
        return float("nan")
    x_star = np.asarray(x_star, dtype=float)
    denom = np.linalg.norm(x_star)
    if denom == 0.0:
        return float(np.linalg.norm(x))
    return float(np.linalg.norm(np.asarray(x) - x_star) / denom)
