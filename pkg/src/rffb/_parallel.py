from concurrent.futures import ProcessPoolExecutor


def _call(packed):
    fn, args = packed
    return fn(*args)


def parallel_map(fn, arg_tuples, jobs=1):
    """``[fn(*args) for args in arg_tuples]``, optionally across processes.

    Results come back in input order, so anything reduced from them in order
    is identical for every ``jobs`` value.
    """
    arg_tuples = list(arg_tuples)
    if jobs is None or jobs <= 1 or len(arg_tuples) <= 1:
        return [fn(*args) for args in arg_tuples]
    with ProcessPoolExecutor(max_workers=min(jobs, len(arg_tuples))) as pool:
        return list(pool.map(_call, [(fn, args) for args in arg_tuples]))
