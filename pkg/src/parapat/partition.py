"""Static partitioning of equally weighted work and gathering of results."""
from __future__ import annotations


class NotRoot:
    """Returned by :func:`collect_subproblem_output_args` on non-root ranks.

    Any attempt to treat it as the gathered sequence fails loudly.
    """

    __slots__ = ()

    def __repr__(self):
        return "NOT_ROOT"

    def __reduce__(self):
        # unpickles to the module singleton, keeping ``is NOT_ROOT`` checks valid
        return "NOT_ROOT"

    def __bool__(self):
        raise TypeError("result is only available on rank 0")

    def __len__(self):
        raise TypeError("result is only available on rank 0")

    def __iter__(self):
        raise TypeError("result is only available on rank 0")

    def __getitem__(self, item):
        raise TypeError("result is only available on rank 0")


NOT_ROOT = NotRoot()


def simple_partitioning(length: int, num_procs: int) -> list[int]:
    """Split ``length`` items over ``num_procs`` ranks as evenly as possible.

    Every rank gets ``length // num_procs`` items and the first
    ``length % num_procs`` ranks get one more.

    >>> simple_partitioning(10, 3)
    [4, 3, 3]
    """
    if num_procs <= 0:
        raise ValueError(f"num_procs must be positive, got {num_procs}")
    if length < 0:
        raise ValueError(f"length must be non-negative, got {length}")
    base, extra = divmod(length, num_procs)
    return [base + 1 if i < extra else base for i in range(num_procs)]


def partition_offsets(length: int, num_procs: int) -> list[int]:
    """Start offset of each rank's block; ``offsets[P]`` equals ``length``."""
    offsets = [0]
    for n in simple_partitioning(length, num_procs):
        offsets.append(offsets[-1] + n)
    return offsets


def get_subproblem_input_args(items, my_rank: int, num_procs: int):
    """Contiguous block of ``items`` assigned to ``my_rank``."""
    if not 0 <= my_rank < num_procs:
        raise ValueError(f"rank {my_rank} out of range for {num_procs} ranks")
    sub_ns = simple_partitioning(len(items), num_procs)
    offset = sum(sub_ns[:my_rank])
    return items[offset:offset + sub_ns[my_rank]]


def collect_subproblem_output_args(my_outputs, comm):
    """Concatenate every rank's outputs on rank 0, in rank order.

    Rank 0 receives a new list; the other ranks send their block and get
    :data:`NOT_ROOT` back.
    """
    if comm.rank == 0:
        output = list(my_outputs)
        for source in range(1, comm.size):
            output.extend(comm.recv(source))
        return output
    comm.send(list(my_outputs), 0)
    return NOT_ROOT
