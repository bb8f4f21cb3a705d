"""Source text of the sample programs shipped in ``hoq/corpus``.

Programs are kept as builders so that parameterised families (teleporting a
qubit prepared by a chosen gate) can be generated; the ``.hoq`` files are
renderings of the default instances.
"""

from __future__ import annotations

import json
from importlib import resources
from math import sqrt

import numpy as np

_H = 1 / sqrt(2)


def _lit(m) -> str:
    m = np.asarray(m, dtype=float)
    return json.dumps([[float(x) for x in row] for row in m])


# Bell-pair preparation on |00>: (H ⊗ I) followed by CNOT, written as one matrix.
EPR_GATE = _H * np.array([[1, 0, 1, 0], [0, 1, 0, 1], [0, 1, 0, -1], [1, 0, -1, 0]])
# Bell-basis rotation on the first two of three qubits.
BELL_GATE = _H * np.array([
    [1, 0, 0, 0, 0, 0, 1, 0],
    [0, 1, 0, 0, 0, 0, 0, 1],
    [0, 0, 1, 0, 1, 0, 0, 0],
    [0, 0, 0, 1, 0, 1, 0, 0],
    [1, 0, 0, 0, 0, 0, -1, 0],
    [0, 1, 0, 0, 0, 0, 0, -1],
    [0, 0, 1, 0, -1, 0, 0, 0],
    [0, 0, 0, 1, 0, -1, 0, 0],
])
ZX_GATE = np.array([[0, 1], [-1, 0]])

FCOIN = """\
-- a fair coin: measure |+>
def fcoin = gate[H] new[|0><0|];
def toss = \\x:qbit. meas[1,1] x;
toss fcoin
"""

OMEGA = """\
-- a diverging bit program
letrec f:(bit -o bit) x = f x in f tt
"""

TREE = """\
-- one measurement of |+>
meas[1,1] (gate[H] new[|0><0|])
"""

# v is |+> and u = sqrt(1/3)|0> + sqrt(2/3)|1>.  When v reads 0 the result is
# the negated reading of u, otherwise tt: 1/2 + 1/2 * 2/3 = 5/6.
_U_STATE = [[1 / 3, sqrt(2) / 3], [sqrt(2) / 3, 2 / 3]]
TWO_MEASUREMENTS = f"""\
-- two measurements, the second only on one branch of the first
let <v:qbit, u:qbit> = <new[|+><+|], new[{_lit(_U_STATE)}]> in
match meas[1,1] v with
  ( x:top -> match meas[1,1] u with (a:top -> ff | b:top -> tt)
  | y:top -> tt )
"""


def teleport_source(gate: str = "H", measure: bool = True) -> str:
    """Teleport ``gate new|0>``; with ``measure`` the result is measured to a bit."""
    epr = f"gate[{_lit(EPR_GATE)}] (cmp[1,1] <new[|0><0|], new[|0><0|]>)"
    corrections = {"00": "q", "01": "gate[X] q", "10": "gate[Z] q",
                   "11": f"gate[{_lit(ZX_GATE)}] q"}

    def fix(b1_branch: str) -> str:
        return (f"match b1 with (c:top -> {corrections[b1_branch + '0']} "
                f"| d:top -> {corrections[b1_branch + '1']})")

    body = f"""\
def epr = {epr};
def bellmeasure = \\w:qbit[3].
  let <b0:bit, p:qbit[2]> = meas[3,1] (gate[{_lit(BELL_GATE)}] w) in
  let <b1:bit, q:qbit> = meas[2,1] p in <b0, <b1, q>>;
def corr = \\x:(bit * (bit * qbit)).
  let <b0:bit, y:(bit * qbit)> = x in
  let <b1:bit, q:qbit> = y in
  match b0 with (e:top -> {fix('0')} | f:top -> {fix('1')});
def qtel = \\x:qbit. corr (bellmeasure (cmp[1,2] <x, epr>));
"""
    prepared = f"gate[{gate}] new[|0><0|]"
    tail = f"meas[1,1] (qtel ({prepared}))" if measure else f"qtel ({prepared})"
    return body + tail + "\n"


def direct_source(gate: str = "H") -> str:
    """``meas (U new|0>)``: what teleportation must reproduce."""
    return f"meas[1,1] (gate[{gate}] new[|0><0|])\n"


CORPUS = {
    "fcoin": FCOIN,
    "omega": OMEGA,
    "tree": TREE,
    "twomeas": TWO_MEASUREMENTS,
    "qtel": teleport_source("H"),
    "qtel_direct": direct_source("H"),
}


def corpus_source(name: str) -> str:
    """Read ``corpus/<name>.hoq`` from the installed package."""
    return resources.files("hoq").joinpath("corpus", f"{name}.hoq").read_text()


def corpus_names() -> list:
    root = resources.files("hoq").joinpath("corpus")
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".hoq"))
