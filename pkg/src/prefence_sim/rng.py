"""Seeded xorshift64* generator.

All randomness in the simulator flows from one 64-bit seed through this
generator so that runs are reproducible across platforms and languages.

    seeding:  state = splitmix64(seed); state 0 is replaced by 0x9E3779B97F4A7C15
    step:     x ^= x >> 12; x ^= x << 25; x ^= x >> 27
    output:   (x * 0x2545F4914F6CDD1D) mod 2**64

``below(n)`` uses rejection sampling on the 64-bit output so results are
unbiased and exactly reproducible.
"""

MASK64 = (1 << 64) - 1
MULTIPLIER = 0x2545F4914F6CDD1D
GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(x):
    x = (x + GOLDEN) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


class XorShift64Star:
    def __init__(self, seed):
        if not isinstance(seed, int) or seed < 0:
            raise ValueError(f"seed must be a non-negative integer, got {seed!r}")
        state = splitmix64(seed & MASK64)
        self.state = state or GOLDEN

    def next_u64(self):
        x = self.state
        x ^= x >> 12
        x ^= (x << 25) & MASK64
        x ^= x >> 27
        self.state = x
        return (x * MULTIPLIER) & MASK64

    def below(self, n):
        """Uniform integer in ``[0, n)``."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            r = self.next_u64()
            if r < limit:
                return r % n

    def bit(self):
        return self.next_u64() >> 63

    def random(self):
        return (self.next_u64() >> 11) / float(1 << 53)

    def shuffle(self, items):
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]

    def permutation(self, n):
        items = list(range(n))
        self.shuffle(items)
        return items

    def fork(self):
        """Independent child stream derived from this one."""
        return XorShift64Star(self.next_u64())
