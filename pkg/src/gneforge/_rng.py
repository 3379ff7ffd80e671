"""Counter-based deterministic random draws for event schedules.

The asynchronous engine needs activation and delay draws that are pure
functions of (seed, step, reader, writer): no generator state to carry, no
stream to misalign, and trivially reproducible in compiled code.  We use the
splitmix64 finalizer evaluated at ``seed + (counter+1)*GOLDEN``, which is the
standard way to jump a splitmix64 stream to an arbitrary counter.

The exact algorithm (all arithmetic mod 2^64):

    out(seed, ctr) = mix(seed + (ctr + 1) * 0x9E3779B97F4A7C15)
    mix(z): z ^= z >> 30; z *= 0xBF58476D1CE4E5B9
            z ^= z >> 27; z *= 0x94D049BB133111EB
            z ^= z >> 31; return z

Uniform doubles take the top 53 bits: (out >> 11) * 2^-53.  Bounded integers
use out mod (bound), whose bias is < 2^-57 for the bounds used here (<= 64).
The compiled engine re-implements these few lines in C; both backends must
produce identical draws (this is tested).
"""

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def splitmix64(seed, counter):
    """The counter-th output of a splitmix64 stream started at seed."""
    # int() guards against numpy integer operands, which would overflow
    z = (int(seed) + ((int(counter) + 1) * _GOLDEN)) & _MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


def uniform01(seed, counter):
    """Deterministic uniform double in [0, 1)."""
    return (splitmix64(seed, counter) >> 11) * 2.0 ** -53


def derive_seed(seed, tag):
    """A decorrelated sub-seed for an independent purpose (activation, delay).

    tag may be a short string label or an integer counter.
    """
    if isinstance(tag, str):
        tag = int.from_bytes(tag.encode("utf-8")[:8].ljust(8, b"\0"),
                             "little")
    return splitmix64(seed & _MASK64, tag & _MASK64)


def activation_draw(act_seed, k, cum_p):
    """Agent index activated at step k: inverse CDF over cumulative p.

    cum_p is the cumulative probability vector with cum_p[-1] == 1.
    Returns the smallest i with u < cum_p[i].
    """
    u = uniform01(act_seed, k)
    n = len(cum_p)
    for i in range(n):
        if u < cum_p[i]:
            return i
    return n - 1


def delay_draw(delay_seed, k, reader, writer, n_agents, phi_max):
    """Delay sampled for (step, reader, writer), uniform on {0, ..., phi_max}."""
    if phi_max == 0:
        return 0
    ctr = (k * n_agents + reader) * n_agents + writer
    return splitmix64(delay_seed, ctr) % (phi_max + 1)
