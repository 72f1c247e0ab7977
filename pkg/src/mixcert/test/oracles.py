"""
测试用的独立参照实现
Cayley 图上的广度优先搜索，与被测代码不共享枚举逻辑
"""
from collections import deque
from typing import Dict

from mixcert.core.group_core import GroupElement, GroupSpec


def cayley_distances(group: GroupSpec, radius: int) -> Dict[GroupElement, int]:
    """从单位元出发、半径为 radius 的 Cayley 图距离表"""
    steps = []
    for g in group.generators():
        steps.extend((g, group.inverse(g)))
    start = group.identity()
    dist = {start: 0}
    queue = deque([start])
    while queue:
        x = queue.popleft()
        if dist[x] == radius:
            continue
        for s in steps:
            y = group.product(x, s)
            if y not in dist:
                dist[y] = dist[x] + 1
                queue.append(y)
    return dist


def ball_size(group: GroupSpec, radius: int) -> int:
    return len(cayley_distances(group, radius))


def z2_diagonal_sample(g, j: int) -> float:
    """Z^2、x_j = j(1,1) 时 δ_g 上 D_j 的乘子 (|g| - |g - x_j|) / |x_j|"""
    x = (j, j)
    lg = abs(g[0]) + abs(g[1])
    shifted = abs(g[0] - x[0]) + abs(g[1] - x[1])
    return (lg - shifted) / (2 * j)
