"""Counter-based random streams.

Every random draw in a campaign comes from a stream keyed by the campaign seed, a fixed
stream id and any number of counters (receiver index, snapshot counter, ...). The same key
always yields the same numbers, no matter in which order or on which worker it is drawn.
"""
import numpy as np

STREAM_CLOCK = 1
STREAM_NOISE = 2
STREAM_BEACON = 4
STREAM_DELAY_NOISE = 5
STREAM_FRAME_LOSS = 6


def stream(seed: int, stream_id: int, *counters: int) -> np.random.Generator:
    """Generator for the key (seed, stream_id, *counters)."""
    key = (int(stream_id), ) + tuple(int(c) for c in counters)
    sequence = np.random.SeedSequence(int(seed), spawn_key=key)
    return np.random.Generator(np.random.Philox(sequence))


def complex_normal(generator: np.random.Generator, size, power: float = 1.0) -> np.ndarray:
    """Circular complex gaussian samples with mean power `power`."""
    scale = np.sqrt(power / 2)
    return scale * generator.standard_normal(size) + 1j * scale * generator.standard_normal(size)
