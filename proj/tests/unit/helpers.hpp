#pragma once

#include <cmath>
#include <functional>
#include <string>

#include "pipeobs/netmodel.hpp"

namespace testutil {

inline const char* kRestConfig = R"({
  "name": "rest",
  "topology": {
    "nodes": [{"id": "in", "kind": "boundary"}, {"id": "out", "kind": "boundary"}],
    "edges": [{"id": "pipe", "from": "in", "to": "out", "length": 1.0}]
  },
  "law": {"kind": "isothermal", "params": {"c": 1.0}, "rho_ref": 1.0},
  "physics": {"gamma": 0.0, "mu": 0.0, "mode": "none"},
  "initial": {"*": {"rho": 1.0, "v": 0.0}},
  "boundary": [
    {"node": "in", "quantity": "m", "schedule": 0.0},
    {"node": "out", "quantity": "h", "schedule": 1.0}
  ],
  "grid": {"cells": 20, "cfl": 0.5, "stepper": "moc"},
  "time": {"T": 0.5, "samples": 10}
})";

inline const char* kStarConfig = R"({
  "name": "star",
  "topology": {
    "nodes": [{"id": "b1", "kind": "boundary"}, {"id": "b2", "kind": "boundary"},
              {"id": "b3", "kind": "boundary"}, {"id": "hub", "kind": "inner"}],
    "edges": [{"id": "e1", "from": "b1", "to": "hub", "length": 1.0},
              {"id": "e2", "from": "hub", "to": "b2", "length": 1.0},
              {"id": "e3", "from": "hub", "to": "b3", "length": 1.0}]
  },
  "law": {"kind": "isothermal", "params": {"c": 1.0}, "rho_ref": 1.0},
  "physics": {"gamma": 0.1, "mu": 1.0, "mode": "velocity"},
  "initial": {"*": {"rho": 1.0, "v": 0.0}},
  "boundary": [
    {"node": "b1", "quantity": "m", "schedule": 0.0},
    {"node": "b2", "quantity": "m", "schedule": 0.0},
    {"node": "b3", "quantity": "m", "schedule": 0.0}
  ],
  "grid": {"cells": 20, "cfl": 0.5, "stepper": "fv"},
  "time": {"T": 0.5, "samples": 10}
})";

inline pipeobs::Scenario rest_scenario() { return pipeobs::load_scenario(kRestConfig); }

/// Root of a monotone function on [lo, hi] by bisection.
inline double bisect(const std::function<double(double)>& f, double lo, double hi,
                     double tol = 1e-14) {
    double flo = f(lo);
    for (int i = 0; i < 200 && hi - lo > tol; ++i) {
        double mid = 0.5 * (lo + hi);
        double fm = f(mid);
        if ((fm < 0) == (flo < 0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

/// Composite Simpson on [a, b].
inline double simpson(const std::function<double(double)>& f, double a, double b, int n = 2000) {
    double h = (b - a) / n, s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

}  // namespace testutil
