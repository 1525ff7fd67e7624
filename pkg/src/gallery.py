"""Built-in scenarios, runnable by name."""

from typing import Dict, List, Tuple

GALLERY: Dict[str, Tuple[str, str]] = {}


def _register(name: str, description: str, text: str) -> None:
    GALLERY[name] = (description, text.strip() + "\n")


_register("sft-holonomy", "Stable holonomies of a Hoelder tail cocycle over the full 2-shift", """
[scenario]
name = sft-holonomy
description = Stable holonomies of a Hoelder tail cocycle over the full 2-shift
pipeline = sft-holonomy
seed = 7
budget = 60

[base]
kind = sft
transition = [[1, 1], [1, 1]]
nu = 0.25

[cocycle]
kind = tail
beta = 0.5
window = (-1, 0)
core = {'00': 'rotation(0.10)', '01': 'rotation(0.15)', '10': 'rotation(0.20)', '11': 'rotation(0.25)'}
past = {'0': [[0.05, 0.02], [0.02, -0.05]], '1': [[-0.03, 0.04], [0.01, 0.03]]}

[pipeline]
horizon = 24
max_theta = 0.6
points = 5
deepest = 13
min_pairs = 50
truncation = 6
""")

_register("planted-coboundary", "Recover a planted transfer map from holonomies at a fixed point", """
[scenario]
name = planted-coboundary
description = Recover a planted transfer map from holonomies at a fixed point
pipeline = planted-coboundary
seed = 11
budget = 60

[base]
kind = sft
transition = [[1, 1], [1, 1]]
nu = 0.5

[cocycle]
kind = coboundary
beta = 1.0
target = rotation(0.2)
transfer_window = (0, 1)
transfer = {'00': [[1, 0], [0, 1]], '01': [[1.1, 0.2], [0, 0.9]], '10': [[1, 0.1], [-0.1, 1.05]], '11': [[0.9, -0.1], [0.2, 1.1]]}

[pipeline]
anchor = 0
depth = 8
limit = 512
conjugator = [[1, 0.3], [0, 1]]
pipeline_depth = 3
pipeline_limit = 128
recurrence_max = 20
consistency_points = 8
closing_period = 10
closing_orbits = 3
lyapunov_steps = 1000
determinant_steps = 50
""")

_register("delta-narrow-splitting", "Narrow periodic spectrum and certified dominated splittings in dimension 3", """
[scenario]
name = delta-narrow-splitting
description = Narrow periodic spectrum and certified dominated splittings in dimension 3
pipeline = delta-narrow-splitting
seed = 5
budget = 120

[base]
kind = sft
transition = [[1, 1], [1, 0]]
nu = 0.5

[cocycle]
kind = perturbed_constant
matrix = diag(4, 1, 0.25)
scale = 0.02
perturbation = {'0': [[0.2, 1, 0.5], [0.5, 0, 1], [0, 0.5, -0.2]], '1': [[-0.2, 0, 1], [1, 0.2, 0.5], [0.5, 1, 0]]}

[pipeline]
n_max = 10
max_delta = 0.05
samples = 8
horizon = 20
max_tau = 0.3
closing_period = 10
closing_orbits = 3
lyapunov_steps = 400
determinant_steps = 4
""")

_register("unipotent-criterion", "Unipotent cocycle cohomologous to a constant: conjugate periodic data", """
[scenario]
name = unipotent-criterion
description = Unipotent cocycle cohomologous to a constant: conjugate periodic data
pipeline = unipotent-criterion
seed = 3
budget = 60

[base]
kind = sft
transition = [[1, 1], [1, 1]]
nu = 0.5

[cocycle]
kind = unipotent
window = (0, 1)
alpha = {'00': 1.0, '01': 1.5, '10': 0.5, '11': 1.0}
target = 1.0

[pipeline]
n_max = 10
max_ratio = 3.0
divergence_steps = 4096
""")

_register("unipotent-negative", "Unipotent cocycle with a vanishing Birkhoff sum on the orbit of 01", """
[scenario]
name = unipotent-negative
description = Unipotent cocycle with a vanishing Birkhoff sum on the orbit of 01
pipeline = unipotent-criterion
seed = 3
budget = 30

[base]
kind = sft
transition = [[1, 1], [1, 1]]
nu = 0.5

[cocycle]
kind = unipotent
window = (0, 0)
alpha = {'0': 1.0, '1': -1.0}
target = 1.0

[pipeline]
n_max = 6
divergence_steps = 1024
""")

_register("coprime-combine", "Conjugacies over coprime powers and a negative control valid only over f^3", """
[scenario]
name = coprime-combine
description = Conjugacies over coprime powers and a negative control valid only over f^3
pipeline = coprime-combine
seed = 13
budget = 30

[base]
kind = sft
transition = [[1, 1], [1, 1]]
nu = 0.5

[cocycle]
kind = coboundary
beta = 1.0
target = rotation(1/3)
transfer_window = (0, 1)
transfer = {'00': [[1, 0], [0, 1]], '01': [[1.1, 0.2], [0, 0.9]], '10': [[1, 0.1], [-0.1, 1.05]], '11': [[0.9, -0.1], [0.2, 1.1]]}

[pipeline]
n = 1
m = 2
k = 3
bezout = (-1, 1)
anchor = 0
samples = 32
negative_target = rotation(1/3)
negative_distortion = diag(2, 1)
""")

_register("catmap-rigidity", "Franks-Manning conjugacies for perturbed and planted cat maps", """
[scenario]
name = catmap-rigidity
description = Franks-Manning conjugacies for perturbed and planted cat maps
pipeline = catmap-rigidity
seed = 17
budget = 120

[base]
kind = perturbed
matrix = [[2, 1], [1, 1]]
terms = [([1, 0], [0.01, 0], [0, 0])]
scale = 1.0

[pipeline]
grid = 256
planted_grid = 64
planted_terms = [([1, 0], [0.02, 0.01], [0, 0]), ([0, 1], [0, 0.015], [0, 0])]
translation = [0.3, 0.1]
translation_points = 4
""")

_register("linearization-demo", "Leaf charts, foliation holonomy and bunching of a perturbed cat map", """
[scenario]
name = linearization-demo
description = Leaf charts, foliation holonomy and bunching of a perturbed cat map
pipeline = linearization-demo
seed = 19
budget = 60

[base]
kind = perturbed
matrix = [[2, 1], [1, 1]]
terms = [([1, 0], [0.01, 0], [0, 0])]
scale = 1.0

[pipeline]
point = [0.21, 0.37]
radius = 0.05
offset = [0.01, 0.004]
holonomy_radius = 0.02
""")

_register("t4-skew", "Periodic spectra of a skew product on T^4 without a derivative transfer", """
[scenario]
name = t4-skew
description = Periodic spectra of a skew product on T^4 without a derivative transfer
pipeline = t4-skew
seed = 23
budget = 120

[base]
kind = skew
epsilon = 0.05

[pipeline]
n_max = 6
grid = 3
""")

_register("weak-irreducibility", "Weak irreducibility of hyperbolic automorphisms", """
[scenario]
name = weak-irreducibility
description = Weak irreducibility of hyperbolic automorphisms
pipeline = weak-irreducibility
seed = 0
budget = 10

[pipeline]
matrix.cat = [[2, 1], [1, 1]]
expect.cat = true
matrix.double = [[2, 1, 0, 0], [1, 1, 0, 0], [0, 0, 2, 1], [0, 0, 1, 1]]
expect.double = true
matrix.skew = [[2, 1, 0, 0], [1, 1, 0, 0], [0, 0, 3, 1], [0, 0, 2, 1]]
expect.skew = false
""")


def list_gallery() -> List[Tuple[str, str]]:
    """(name, description) of every built-in scenario, sorted by name."""
    return sorted((name, description) for name, (description, _) in GALLERY.items())
