import timeit

from mcfrac.correction import derive
from mcfrac.numeric import const_c1, gamma_reference
from mcfrac.seriesgen import brouncker_certified_k, brouncker_raw_series, lebesgue_aj

CASES = [
    ("landau", 1),
    ("landau", 2),
    ("landau", 3),
    ("lebesgue", 1),
    ("lebesgue", 2),
    ("euler", 4),
    ("euler", 8),
]


def clear_caches() -> None:
    brouncker_raw_series.cache_clear()
    brouncker_certified_k.cache_clear()
    lebesgue_aj.cache_clear()


def run_benchmark():
    print("=== Performance Benchmark: mcfrac.correction.derive ===\n")

    for family, depth in CASES:
        clear_caches()
        cold = timeit.timeit(lambda: derive(family, depth), number=1)
        warm = timeit.timeit(lambda: derive(family, depth), number=1)
        print(f"{family:<9} depth {depth}: cold {cold:.3f} s, warm {warm:.3f} s")

    print("\n--- reference constants (192 bits) ---")
    for name, fn in (("gamma", gamma_reference), ("c1", const_c1)):
        fn.cache_clear()
        elapsed = timeit.timeit(lambda fn=fn: fn(192), number=1)
        print(f"{name:<6} {elapsed:.3f} s")


if __name__ == "__main__":
    run_benchmark()
