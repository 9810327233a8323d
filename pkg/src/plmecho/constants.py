"""Frame, level and sign conventions used throughout the simulator.

Levels are labelled 1, 2 (ground spin doublet), 3, 4 (optically excited) and
``s`` (auxiliary shelving spin level).  The simulator works in the frame
co-rotating with every applied carrier, so each level only carries its
inhomogeneous offset:

    E_1 = E_2 = E_s = 0,    E_3 = E_4 = Delta  (one shared optical offset per atom)

A level amplitude evolves as ``c_a(t) = exp(-i E_a t) c_a(0)`` and a density
matrix element as ``rho_ab -> exp(-i (E_a - E_b) t) rho_ab``.

Coherence naming follows the projector ``P_nm = |n><m|``: the stored value is
the expectation ``<P_nm> = rho_mn``.  So ``rho12 = <|1><2|> = rho[2, 1]`` and
``sigma13 = rho[3, 1]``.

A resonant rotation of area ``theta`` and phase ``phi`` on levels (a, b),
a < b, is

    U = [[cos(theta/2),            -i exp(-i phi) sin(theta/2)],
         [-i exp(+i phi) sin(theta/2),  cos(theta/2)           ]]

With these choices RF(theta0, phi0) -> pi(1-4, phi1) -> free T -> pi(1-4, phi2)
gives ``rho12 = (i/2) sin(theta0) exp(i Delta T) exp(i (phi0 - phi1 + phi2))``,
i.e. the composite phase is ``phi0 - phi1 + phi2`` in the rotating frame.  The
lab-frame terms ``omega31 T - omega21 tau`` are carried by the drive carriers
and cancel in this frame; :meth:`plmecho.pulses.PlmPrep.lab_frame_phase`
reports them separately.
"""

import numpy as np

GROUND_LEVELS = ("1", "2", "4")
"""Levels of the background block (zeroth order in the signal)."""

EXCITED_LEVELS = ("3", "s")
"""Levels populated only to first order by the signal."""

GROUND_INDEX = {name: i for i, name in enumerate(GROUND_LEVELS)}
EXCITED_INDEX = {name: i for i, name in enumerate(EXCITED_LEVELS)}

# Offset multiplier (in units of the bin detuning) for each level.
LEVEL_OFFSET = {"1": 0.0, "2": 0.0, "3": 1.0, "4": 1.0, "s": 0.0}

# Decay channel of each coherence class.
SPIN_PAIRS = frozenset({("1", "2"), ("1", "s"), ("2", "s")})

ZHAT = np.array([0.0, 0.0, 1.0])

SPEED_OF_LIGHT = 299_792_458.0
