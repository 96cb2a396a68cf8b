from .. import parallelize


def main():
    m, ch = parallelize.remark_instance()
    constructions = [
        ("privatization", parallelize.parallelize_privatization),
        ("compression", parallelize.parallelize_compression),
        ("private prefix", parallelize.parallelize_private_prefix),
    ]
    print(f"{'construction':<16}{'I(S;Y)':>10}{'I(X;Y)':>10}")
    _, report = constructions[0][1](m, ch)
    print(f"{'original':<16}{report.original.leakage_bits:>10.4f}{report.original.utility_bits[0]:>10.4f}")
    for name, transform in constructions:
        _, report = transform(m, ch)
        t = report.transformed
        print(f"{name:<16}{t.leakage_bits:>10.4f}{t.utility_bits[0]:>10.4f}")


if __name__ == "__main__":
    main()
