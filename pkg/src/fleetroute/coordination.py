"""Auction-based assignment of idle nodes to vehicles during a mission.

Each vehicle values an idle node by its insertion ratio psi (rho over added time,
zero when the node does not fit its remaining budget) and keeps its own bid per
node; a node's price is its top bid. Every round each vehicle not already holding
a top bid raises its bid on the node of highest profit (psi - price) by the profit
gap to its second choice plus ``eps_min``. Once a round passes with no raises, each
held node goes to its top bidder; the winners' routes absorb them, bids reset and
valuations are recomputed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

from fleetroute.giant_route import CostMatrix
from fleetroute.route_optimizer import best_insertion


@dataclass
class AgentView:
    vehicle: int
    anchor: int  # matrix index the remaining route continues from
    elapsed: float
    route: list[int]  # remaining node ids after the anchor; awards are inserted here in place
    t_max: float
    reserve: float = 0.0  # seconds held back for travel-time risk
    position: tuple[float, float] | None = None

    def __post_init__(self):
        if self.elapsed < 0:
            raise ValueError("elapsed time must be >= 0")

    @property
    def remaining_budget(self) -> float:
        return max(self.t_max - self.elapsed, 0.0)

    def expected_remaining(self, matrix: CostMatrix) -> float:
        return matrix.route_time(self.route, self.anchor)

    def slack(self, matrix: CostMatrix) -> float:
        return self.t_max - self.elapsed - self.reserve - self.expected_remaining(matrix)


# valuation(agent, node) -> (psi, insertion position or None)
Valuation = Callable[[AgentView, int], tuple]


def insertion_valuation(matrix: CostMatrix) -> Valuation:
    def value(agent: AgentView, node: int):
        pos, psi = best_insertion(agent.route, node, agent.slack(matrix), matrix, agent.anchor)
        return psi, pos

    return value


@dataclass
class AuctionState:
    idle: list[int]
    eps_min: float
    bids: dict = field(default_factory=dict)  # (vehicle, node) -> bid
    increments: dict = field(default_factory=dict)  # (vehicle, node) -> last increment
    targets: dict = field(default_factory=dict)  # vehicle -> node or None
    psi: dict = field(default_factory=dict)  # (vehicle, node) -> (psi, position); empty means stale
    round: int = 0
    awards: list = field(default_factory=list)  # (node, vehicle, psi)
    transcript: list = field(default_factory=list)

    def bid(self, vehicle: int, node: int) -> float:
        return self.bids.get((vehicle, node), 0.0)


def compute_bid_target(agent: AgentView, psi: dict, bids: dict):
    """Node with the highest positive profit psi - bid, as (node, profit); None if no profit is positive."""
    best = None
    for node in sorted(psi):
        if psi[node] <= 0:
            continue
        profit = psi[node] - bids.get(node, 0.0)
        if profit > 0 and (best is None or profit > best[1]):
            best = (node, profit)
    return best


def _second_profit(psi: dict, bids: dict, exclude: int) -> float:
    vals = [psi[j] - bids.get(j, 0.0) for j in psi if j != exclude and psi[j] > 0]
    return max(max(vals, default=0.0), 0.0)


def _holder(state: AuctionState, agents: list[AgentView], node: int):
    """(top bid, vehicle) on ``node``; equal bids go to the lowest vehicle id."""
    bid, neg = max(((state.bid(a.vehicle, node), -a.vehicle) for a in agents), default=(0.0, 0))
    return (bid, -neg) if bid > 0 else (0.0, None)


def auction_round(state: AuctionState, agents: list[AgentView], valuation: Valuation) -> bool:
    """One bidding round; returns True if any bid moved or a node was awarded.

    Profits are psi minus the node's price (its top bid). Vehicles already holding the
    top bid on some node sit the round out. When a round passes with no increments,
    every held node has stopped rising and is awarded to its holder; the auction then
    restarts with cleared bids and fresh valuations.
    """
    state.round += 1
    agents = sorted(agents, key=lambda a: a.vehicle)
    if not state.psi:
        for a in agents:
            for j in state.idle:
                state.psi[(a.vehicle, j)] = valuation(a, j)
    held = {j: _holder(state, agents, j) for j in state.idle}
    holders = {m for _, m in held.values() if m is not None}
    prices = {j: b for j, (b, _) in held.items()}
    state.increments = {}
    raises = []
    for a in agents:
        if a.vehicle in holders:
            state.targets[a.vehicle] = next(j for j, (_, m) in held.items() if m == a.vehicle)
            continue
        psi = {j: state.psi[(a.vehicle, j)][0] for j in state.idle}
        target = compute_bid_target(a, psi, prices)
        state.targets[a.vehicle] = None if target is None else target[0]
        if target is None:
            continue
        j, profit = target
        eps = max(state.eps_min, profit - _second_profit(psi, prices, j) + state.eps_min)
        raises.append((a, j, psi[j], prices[j] + eps, eps))
    # simultaneous bids: everyone saw the same prices
    for a, j, psi_j, bid, eps in raises:
        state.bids[(a.vehicle, j)] = bid
        state.increments[(a.vehicle, j)] = eps
        state.transcript.append({"kind": "bid", "vehicle": a.vehicle, "node": j, "bid": bid,
                                 "psi": psi_j, "round": state.round})
    if raises:
        return True

    by_id = {a.vehicle: a for a in agents}
    awarded = False
    for j in sorted(state.idle):
        top, vid = held[j]
        if vid is None:
            continue
        winner = by_id[vid]
        psi, pos = valuation(winner, j)
        if pos is None or psi <= 0:
            # the winner's situation changed since it bid; log it and let the restart re-auction the node
            state.transcript.append({"kind": "reject", "vehicle": vid, "node": j, "round": state.round})
            continue
        winner.route.insert(pos, j)
        state.idle.remove(j)
        state.awards.append((j, vid, psi))
        state.transcript.append({"kind": "award", "vehicle": vid, "node": j, "bid": top,
                                 "psi": psi, "position": pos, "round": state.round})
        awarded = True
    if holders:
        # restart: fresh bids, valuations recomputed against the updated routes
        state.bids.clear()
        state.psi.clear()
    return awarded


@dataclass
class AuctionResult:
    assignment: dict  # node -> vehicle
    rounds: int
    state: AuctionState

    @property
    def total_psi(self) -> float:
        return float(sum(p for _, _, p in self.state.awards))


def run_auction(idle, agents: list[AgentView], eps_min: float, matrix: CostMatrix | None = None,
                valuation: Valuation | None = None, max_rounds: int = 100_000) -> AuctionResult:
    """Repeat bidding rounds until every idle node is placed or a round changes nothing.

    Awarded nodes are inserted into the winners' ``route`` lists in place.
    """
    if eps_min <= 0:
        raise ValueError("eps_min must be positive")
    if valuation is None:
        if matrix is None:
            raise ValueError("need a cost matrix or a valuation")
        valuation = insertion_valuation(matrix)
    state = AuctionState(idle=sorted(idle), eps_min=eps_min)
    while state.idle and state.round < max_rounds:
        if not auction_round(state, agents, valuation):
            break
    assignment = {j: m for j, m, _ in state.awards}
    return AuctionResult(assignment, state.round, state)


def round_bound(max_psi: float, eps_min: float, n_idle: int) -> float:
    return (max_psi / eps_min) * n_idle + n_idle if n_idle else 0


def optimal_assignment_value(table) -> float:
    """Best total psi over partial one-to-one vehicle/node matchings (brute force)."""
    from itertools import permutations

    n_agents = len(table)
    n_nodes = len(table[0]) if n_agents else 0
    best = 0.0
    slots = list(range(n_nodes)) + [None] * n_agents
    for perm in set(permutations(slots, n_agents)):
        v = sum(table[m][j] for m, j in enumerate(perm) if j is not None)
        best = max(best, v)
    return best if math.isfinite(best) else 0.0
