from __future__ import annotations


class UnionFind:
    """Disjoint sets over ``range(n)`` with path halving and union by size."""

    def __init__(self, n):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, x):
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, x, y):
        """Merge the classes of x and y. Returns False if they were already merged."""
        x, y = self.find(x), self.find(y)
        if x == y:
            return False
        if self.size[x] < self.size[y]:
            x, y = y, x
        self.parent[y] = x
        self.size[x] += self.size[y]
        return True

    def same(self, x, y):
        return self.find(x) == self.find(y)

    def labels(self):
        """Canonical labelling: each element maps to the smallest member of its class."""
        smallest = {}
        out = []
        for x in range(len(self.parent)):
            r = self.find(x)
            out.append(smallest.setdefault(r, x))
        return tuple(out)
