"""Disjoint-set forest with union by size and path compression."""


class UnionFind:
    """Components of a small graph built edge by edge."""

    __slots__ = ("parent", "size", "components")

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n
        self.components = n

    def find(self, v: int) -> int:
        root = v
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[v] != root:
            self.parent[v], v = root, self.parent[v]
        return root

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        self.components -= 1
        return True

    def connected(self, a: int, b: int) -> bool:
        return self.find(a) == self.find(b)

    def sizes(self) -> list[int]:
        """Component sizes in descending order."""
        return sorted(
            (self.size[v] for v in range(len(self.parent)) if self.parent[v] == v),
            reverse=True,
        )


def components_of(n: int, edges) -> UnionFind:
    uf = UnionFind(n)
    for a, b in edges:
        uf.union(a, b)
    return uf
