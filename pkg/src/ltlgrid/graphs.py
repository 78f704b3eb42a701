"""Strongly connected components (iterative Tarjan, explicit recursion stack)."""

from __future__ import annotations

from typing import Callable, Hashable, Iterable, Sequence


def tarjan_sccs(
    vertices: Iterable[Hashable], successors: Callable[[Hashable], Sequence[Hashable]]
) -> list[list[Hashable]]:
    """SCCs of the directed graph, in reverse topological order of the condensation.

    Iterative so deep chains cannot exceed Python's recursion limit. Vertex
    order inside each SCC and the SCC order itself are deterministic given the
    iteration order of `vertices` and `successors`.
    """
    index: dict[Hashable, int] = {}
    lowlink: dict[Hashable, int] = {}
    on_stack: set[Hashable] = set()
    stack: list[Hashable] = []
    sccs: list[list[Hashable]] = []
    counter = 0

    for root in vertices:
        if root in index:
            continue
        # work items: (vertex, iterator over successors)
        work = [(root, iter(successors(root)))]
        index[root] = lowlink[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = lowlink[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(successors(w))))
                    advanced = True
                    break
                if w in on_stack:
                    lowlink[v] = min(lowlink[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                lowlink[parent] = min(lowlink[parent], lowlink[v])
            if lowlink[v] == index[v]:
                scc = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    scc.append(w)
                    if w == v:
                        break
                sccs.append(scc)
    return sccs
