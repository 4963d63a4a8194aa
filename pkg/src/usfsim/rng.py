"""Counter-based random streams keyed by (master seed, path).

Every random object in the library is a Philox generator derived from a
master seed and a tuple of small nonnegative integers naming its role, via
numpy's SeedSequence spawn-key mechanism.  Two consequences the experiment
layer relies on: the stream for (master, path) is a pure function of its
arguments, so any replica or walk can be regenerated in isolation; and
distinct paths give independent streams, so parallel replicas never share
randomness regardless of scheduling.
"""

import numpy as np

# fixed role tags used as the first path component after the replica id
ROLE_FOREST = 0
ROLE_WALK = 1
ROLE_FILL = 2
ROLE_PILOT = 3
ROLE_AUX = 4

_SPAWN_LIMIT = 2 ** 32


def stream(master, *path):
    """Philox Generator for the given master seed and integer path."""
    for p in path:
        if not 0 <= int(p) < _SPAWN_LIMIT:
            raise ValueError("stream path entries must be uint32-sized")
    ss = np.random.SeedSequence(int(master), spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(seed=ss))


def replica_stream(master, replica, role, *rest):
    """Stream for one role inside one replica."""
    return stream(master, replica, role, *rest)


def fill_streams(master, replica, shift):
    """Per-start-vertex fill streams for completing a run at shift m.

    Returns a callable v -> Generator.  Keying by the start vertex (and not
    by draw order) makes the fill randomness at vertex v identical across
    the partial forests it is used to complete, which is what couples the
    interpolating forests to the shifted samplers.
    """
    def at(v):
        return stream(master, replica, ROLE_FILL, shift, v)
    return at
