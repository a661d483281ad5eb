"""Set partitions of the provider set, their enumeration, and merge/split moves.

Partitions are canonicalized through their restricted-growth string (RGS):
element i is labeled with the index of its block, blocks being numbered in
order of first appearance.  Lexicographic RGS order fixes the global state
numbering used by the coalition dynamics, so matrices are reproducible
bit-for-bit across runs.
"""

from dataclasses import dataclass
from itertools import combinations

MAX_PLAYERS = 12


@dataclass(frozen=True)
class Partition:
    """A canonical set partition of providers {1..n}."""

    blocks: tuple  # tuple of tuples of sorted provider ids, ordered by min element

    @staticmethod
    def from_blocks(blocks) -> "Partition":
        """Canonicalize an iterable of disjoint member collections."""
        canon = tuple(sorted((tuple(sorted(b)) for b in blocks if b), key=lambda b: b[0]))
        seen = set()
        for b in canon:
            for x in b:
                if x in seen:
                    raise ValueError(f"player {x} appears in more than one block")
                seen.add(x)
        if seen != set(range(1, len(seen) + 1)):
            raise ValueError("blocks must cover exactly {1..n}")
        return Partition(canon)

    @property
    def n(self) -> int:
        return sum(len(b) for b in self.blocks)

    @property
    def rgs(self) -> tuple:
        """Restricted-growth string over elements 1..n."""
        label = {}
        for i, b in enumerate(self.blocks):
            for x in b:
                label[x] = i
        return tuple(label[x] for x in range(1, self.n + 1))

    def block_of(self, player: int) -> tuple:
        for b in self.blocks:
            if player in b:
                return b
        raise KeyError(player)

    def __str__(self):
        return "|".join(",".join(map(str, b)) for b in self.blocks)


@dataclass(frozen=True)
class Move:
    """A single merge (two blocks -> one) or split (one block -> two)."""

    kind: str  # "merge" | "split"
    source: Partition
    target: Partition
    actors: frozenset  # players whose coalitions change


def bell_number(n: int) -> int:
    """Number of partitions of an n-element set, via the Bell triangle."""
    if not (1 <= n <= MAX_PLAYERS):
        raise ValueError(f"n must be in [1, {MAX_PLAYERS}], got {n}")
    row = [1]
    for _ in range(n):
        nxt = [row[-1]]
        for v in row:
            nxt.append(nxt[-1] + v)
        row = nxt
    return row[0]


def enumerate_partitions(n: int):
    """All partitions of {1..n} in lexicographic RGS order.

    The position of a partition in this list is its state id in the
    coalition Markov chain.
    """
    if not (1 <= n <= MAX_PLAYERS):
        raise ValueError(f"n must be in [1, {MAX_PLAYERS}], got {n}")
    out = []
    rgs = [0] * n

    def rec(i, maxlbl):
        if i == n:
            blocks = [[] for _ in range(maxlbl + 1)]
            for x in range(n):
                blocks[rgs[x]].append(x + 1)
            out.append(Partition(tuple(tuple(b) for b in blocks)))
            return
        for lbl in range(maxlbl + 2):
            rgs[i] = lbl
            rec(i + 1, max(maxlbl, lbl))

    rec(1, 0)  # rgs[0] is fixed at 0
    return out


def _bipartitions(block):
    """All unordered 2-part partitions of a block (size >= 2)."""
    rest = block[1:]
    first = block[0]
    for r in range(len(rest) + 1):
        for picked in combinations(rest, r):
            left = (first, *picked)
            right = tuple(x for x in rest if x not in picked)
            if right:
                yield left, right


def neighbors(p: Partition):
    """All single-move merge and split transitions out of ``p``.

    A merge replaces two blocks by their union; a split replaces one block
    by a bipartition of it.  Finer splits are reachable only via chains of
    moves.  Each move records its actor set (members of the affected blocks).
    """
    moves = []
    blocks = p.blocks
    for a, b in combinations(range(len(blocks)), 2):
        merged = tuple(sorted(blocks[a] + blocks[b]))
        new_blocks = [blk for i, blk in enumerate(blocks) if i not in (a, b)]
        new_blocks.append(merged)
        moves.append(
            Move(
                kind="merge",
                source=p,
                target=Partition.from_blocks(new_blocks),
                actors=frozenset(merged),
            )
        )
    for i, blk in enumerate(blocks):
        if len(blk) < 2:
            continue
        for left, right in _bipartitions(blk):
            new_blocks = [b for j, b in enumerate(blocks) if j != i]
            new_blocks.extend([left, right])
            moves.append(
                Move(
                    kind="split",
                    source=p,
                    target=Partition.from_blocks(new_blocks),
                    actors=frozenset(blk),
                )
            )
    return moves
