#!/usr/bin/env python3
"""Generate the bundled two-agent benchmark instances in .dpomdp format.

Each domain is built from its published verbal description: the state
layout, action and observation alphabets, dynamics and rewards are
written out explicitly below. Output goes to data/benchmarks/.

    python3 tools/gen_benchmarks.py [outdir]
"""

import itertools
import os
import sys


class Instance:
    def __init__(self, name, comment, discount=0.9):
        self.name = name
        self.comment = comment
        self.discount = discount
        self.states = []
        self.actions = ([], [])
        self.observations = ([], [])
        self.start = {}
        self.trans = {}  # (s, a, b) -> {s': p}
        self.obs = {}  # (s', a, b) -> {(y, z): p}
        self.reward = {}  # (s, a, b) -> r

    def add_t(self, s, a, b, s2, p):
        if p == 0.0:
            return
        row = self.trans.setdefault((s, a, b), {})
        row[s2] = row.get(s2, 0.0) + p

    def add_o(self, s2, a, b, y, z, p):
        if p == 0.0:
            return
        row = self.obs.setdefault((s2, a, b), {})
        row[(y, z)] = row.get((y, z), 0.0) + p

    def add_r(self, s, a, b, r):
        self.reward[(s, a, b)] = self.reward.get((s, a, b), 0.0) + r

    def check(self):
        ns = len(self.states)
        na, nb = len(self.actions[0]), len(self.actions[1])
        for s, a, b in itertools.product(range(ns), range(na), range(nb)):
            tot = sum(self.trans.get((s, a, b), {}).values())
            assert abs(tot - 1.0) < 1e-12, (self.name, "T", s, a, b, tot)
            tot = sum(self.obs.get((s, a, b), {}).values())
            assert abs(tot - 1.0) < 1e-12, (self.name, "O", s, a, b, tot)
        assert abs(sum(self.start.values()) - 1.0) < 1e-12

    def write(self, path):
        self.check()
        st, ac, ob = self.states, self.actions, self.observations
        out = []
        for line in self.comment.strip().splitlines():
            out.append("# " + line.strip())
        out.append("agents: 2")
        out.append("discount: %r" % self.discount)
        out.append("values: reward")
        out.append("states: " + " ".join(st))
        out.append("start:")
        out.append(" ".join(repr(self.start.get(i, 0.0)) for i in range(len(st))))
        out.append("actions:")
        out.append(" ".join(ac[0]))
        out.append(" ".join(ac[1]))
        out.append("observations:")
        out.append(" ".join(ob[0]))
        out.append(" ".join(ob[1]))
        out.append("")
        for (s, a, b) in sorted(self.trans):
            for s2, p in sorted(self.trans[(s, a, b)].items()):
                out.append("T: %s %s : %s : %s %r" % (ac[0][a], ac[1][b], st[s], st[s2], p))
        out.append("")
        na, nb = len(ac[0]), len(ac[1])
        for s2 in range(len(st)):
            rows = [self.obs[(s2, a, b)] for a in range(na) for b in range(nb)]
            if all(r == rows[0] for r in rows):
                for (y, z), p in sorted(rows[0].items()):
                    out.append("O: * * : %s : %s %s %r" % (st[s2], ob[0][y], ob[1][z], p))
                continue
            for a, b in itertools.product(range(na), range(nb)):
                for (y, z), p in sorted(self.obs[(s2, a, b)].items()):
                    out.append("O: %s %s : %s : %s %s %r" % (ac[0][a], ac[1][b], st[s2], ob[0][y], ob[1][z], p))
        out.append("")
        for (s, a, b) in sorted(self.reward):
            r = self.reward[(s, a, b)]
            if r != 0.0:
                out.append("R: %s %s : %s : * : * * %r" % (ac[0][a], ac[1][b], st[s], r))
        with open(path, "w") as f:
            f.write("\n".join(out) + "\n")


def broadcast():
    inst = Instance("broadcast", """
        Broadcast channel. Two nodes share one channel; each holds a message
        buffer. Node 1's buffer refills with probability 0.9 per step, node 2's
        with 0.1. A transmission succeeds (reward 1) when exactly one node sends
        and its buffer is full; both sending is a collision. Each node observes
        only whether its own buffer is full after the step.
    """)
    fill = (0.9, 0.1)
    names = {0: "e", 1: "f"}
    inst.states = [names[m1] + names[m2] for m1 in (0, 1) for m2 in (0, 1)]
    inst.actions = (["send", "wait"], ["send", "wait"])
    inst.observations = (["full", "empty"], ["full", "empty"])
    inst.start = {3: 1.0}
    for s in range(4):
        m = (s >> 1, s & 1)
        for a, b in itertools.product(range(2), range(2)):
            sends = (a == 0, b == 0)
            ok = [sends[i] and not sends[1 - i] and m[i] == 1 for i in range(2)]
            inst.add_r(s, a, b, 1.0 if any(ok) else 0.0)
            left = [0 if ok[i] else m[i] for i in range(2)]
            per_agent = []
            for i in range(2):
                per_agent.append({1: 1.0} if left[i] else {1: fill[i], 0: 1.0 - fill[i]})
            for m1, p1 in per_agent[0].items():
                for m2, p2 in per_agent[1].items():
                    inst.add_t(s, a, b, 2 * m1 + m2, p1 * p2)
    for s2 in range(4):
        m = (s2 >> 1, s2 & 1)
        for a, b in itertools.product(range(2), range(2)):
            inst.add_o(s2, a, b, 0 if m[0] else 1, 0 if m[1] else 1, 1.0)
    return inst


def dectiger():
    inst = Instance("dectiger", """
        Multi-agent tiger. A tiger hides behind the left or right door. Each
        agent listens (correct with probability 0.85, independently) or opens
        a door. Opening any door resets the problem uniformly at random.
    """)
    inst.states = ["tiger-left", "tiger-right"]
    inst.actions = (["listen", "open-left", "open-right"],) * 2
    inst.observations = (["hear-left", "hear-right"],) * 2
    inst.start = {0: 0.5, 1: 0.5}
    LISTEN, OL, OR = 0, 1, 2
    for s in range(2):
        gold_door = OR if s == 0 else OL
        for a, b in itertools.product(range(3), range(3)):
            acts = sorted((a, b))
            if a == LISTEN and b == LISTEN:
                r = -2.0
            elif acts[0] == LISTEN:
                r = 9.0 if acts[1] == gold_door else -101.0
            elif a == b:
                r = 20.0 if a == gold_door else -50.0
            else:
                r = -100.0
            inst.add_r(s, a, b, r)
            if a == LISTEN and b == LISTEN:
                inst.add_t(s, a, b, s, 1.0)
            else:
                inst.add_t(s, a, b, 0, 0.5)
                inst.add_t(s, a, b, 1, 0.5)
    for s2 in range(2):
        for a, b in itertools.product(range(3), range(3)):
            if a == LISTEN and b == LISTEN:
                for y, z in itertools.product(range(2), range(2)):
                    py = 0.85 if y == s2 else 0.15
                    pz = 0.85 if z == s2 else 0.15
                    inst.add_o(s2, a, b, y, z, py * pz)
            else:
                for y, z in itertools.product(range(2), range(2)):
                    inst.add_o(s2, a, b, y, z, 0.25)
    return inst


def recycling():
    inst = Instance("recycling", """
        Recycling robots. Two robots with high/low batteries search for small
        cans (reward 2 each), cooperate on a large can (reward 5, both must
        search big) or recharge. Searching drains the battery; a robot that
        runs flat from low is rescued back to high at a cost of 3. Each robot
        observes its own battery level.
    """)
    H, L = 0, 1
    inst.states = ["HH", "HL", "LH", "LL"]
    inst.actions = (["search-big", "search-small", "recharge"],) * 2
    inst.observations = (["high", "low"],) * 2
    inst.start = {0: 1.0}
    BIG, SMALL, RECHARGE = 0, 1, 2

    def battery(level, act):
        """Returns ({next level: prob}, probability of running flat)."""
        if act == RECHARGE:
            return {H: 1.0}, 0.0
        stay = 0.8 if act == SMALL else 0.5
        if level == H:
            return {H: stay, L: 1.0 - stay}, 0.0
        return {L: stay, H: 1.0 - stay}, 1.0 - stay

    for s in range(4):
        lv = (s >> 1, s & 1)
        for a, b in itertools.product(range(3), range(3)):
            r = 0.0
            if a == BIG and b == BIG:
                r += 5.0
            r += 2.0 * ((a == SMALL) + (b == SMALL))
            d1, f1 = battery(lv[0], a)
            d2, f2 = battery(lv[1], b)
            r -= 3.0 * (f1 + f2)
            inst.add_r(s, a, b, r)
            for l1, p1 in d1.items():
                for l2, p2 in d2.items():
                    inst.add_t(s, a, b, 2 * l1 + l2, p1 * p2)
    for s2 in range(4):
        for a, b in itertools.product(range(3), range(3)):
            inst.add_o(s2, a, b, s2 >> 1, s2 & 1, 1.0)
    return inst


def meeting_grid():
    inst = Instance("meeting_grid", """
        Meeting on a 2x2 grid. Agents start in opposite corners and earn 1 for
        every step they share a cell. A move succeeds with probability 0.6 and
        otherwise leaves the agent where it is; moving into a wall or staying
        keeps the agent in place. An agent only senses whether the wall is on
        its left or its right.
    """)
    # cells: 0 = top-left, 1 = top-right, 2 = bottom-left, 3 = bottom-right
    acts = ["up", "down", "left", "right", "stay"]
    inst.actions = (acts, acts)
    inst.observations = (["wall-left", "wall-right"],) * 2
    inst.states = ["c%d-c%d" % (i, j) for i in range(4) for j in range(4)]
    inst.start = {0 * 4 + 3: 1.0}

    def move(cell, outcome):
        x, y = cell % 2, cell // 2
        if outcome == 0:
            y = 0
        elif outcome == 1:
            y = 1
        elif outcome == 2:
            x = 0
        elif outcome == 3:
            x = 1
        return 2 * y + x

    def dist(cell, act):
        out = {cell: 0.4}
        target = move(cell, act)
        out[target] = out.get(target, 0.0) + 0.6
        return out

    for s in range(16):
        c1, c2 = divmod(s, 4)
        for a, b in itertools.product(range(5), range(5)):
            inst.add_r(s, a, b, 1.0 if c1 == c2 else 0.0)
            for n1, p1 in dist(c1, a).items():
                for n2, p2 in dist(c2, b).items():
                    inst.add_t(s, a, b, 4 * n1 + n2, p1 * p2)
    for s2 in range(16):
        c1, c2 = divmod(s2, 4)
        for a, b in itertools.product(range(5), range(5)):
            inst.add_o(s2, a, b, c1 % 2, c2 % 2, 1.0)
    return inst


def box_pushing():
    inst = Instance("box_pushing", """
        Cooperative box pushing. Both agents move along the bottom row of the
        grid (columns 0-3) and face north, east, south or west. Directly north
        of them sit a small box (column 0), a large box (columns 1-2) and a
        small box (column 3), with the goal area beyond. Pushing a small box
        into the goal pays 10; the large box pays 100 but only moves when both
        agents push it together. Every step costs 0.1 and walking into a wall
        costs 5. Actions succeed with probability 0.9 and otherwise do nothing.
        A delivered box resets the problem. Agents observe what is directly in
        front of them.
    """)
    N, E, S, W = range(4)
    TURN_L, TURN_R, MOVE, STAY = range(4)
    EMPTY, WALL, AGENT, SMALL, LARGE = range(5)
    dirs = "NESW"
    inst.actions = (["turn-left", "turn-right", "move", "stay"],) * 2
    inst.observations = (["empty", "wall", "agent", "small-box", "large-box"],) * 2
    states = []
    for c1, o1, c2, o2 in itertools.product(range(4), range(4), range(4), range(4)):
        if c1 != c2:
            states.append((c1, o1, c2, o2))
    index = {st: i for i, st in enumerate(states)}
    inst.states = ["a%d%s-b%d%s" % (c1, dirs[o1], c2, dirs[o2]) for c1, o1, c2, o2 in states]
    start = (0, E, 3, W)
    inst.start = {index[start]: 1.0}

    def box_above(col):
        return LARGE if col in (1, 2) else SMALL

    def front(col, ori, other):
        if ori == N:
            return box_above(col)
        if ori == S:
            return WALL
        nxt = col + (1 if ori == E else -1)
        if nxt < 0 or nxt > 3:
            return WALL
        return AGENT if nxt == other else EMPTY

    def step(st, acts):
        """Deterministic outcome of effective actions: (next state, reward)."""
        c = [st[0], st[2]]
        o = [st[1], st[3]]
        reward = 0.0
        pushing = [acts[i] == MOVE and o[i] == N for i in range(2)]
        delivered = 0.0
        for i in range(2):
            if pushing[i] and box_above(c[i]) == SMALL:
                delivered += 10.0
        if all(pushing) and box_above(c[0]) == LARGE and box_above(c[1]) == LARGE:
            delivered += 100.0
        for i in range(2):
            if acts[i] == MOVE and o[i] == S:
                reward -= 5.0
        if delivered > 0.0:
            return start, reward + delivered
        target = list(c)
        for i in range(2):
            if acts[i] == TURN_L:
                o[i] = (o[i] + 3) % 4
            elif acts[i] == TURN_R:
                o[i] = (o[i] + 1) % 4
            elif acts[i] == MOVE and o[i] in (E, W):
                nxt = c[i] + (1 if o[i] == E else -1)
                if nxt < 0 or nxt > 3:
                    reward -= 5.0
                else:
                    target[i] = nxt
        # collisions: same target, swap, or walking into a non-moving agent
        if target[0] == target[1]:
            target = list(c)
        elif target[0] == c[1] and target[1] == c[0]:
            target = list(c)
        else:
            for i in range(2):
                if target[i] == c[1 - i] and target[1 - i] == c[1 - i]:
                    target[i] = c[i]
        return (target[0], o[0], target[1], o[1]), reward

    for st in states:
        s = index[st]
        for a, b in itertools.product(range(4), range(4)):
            r = -0.1
            for e1, e2 in itertools.product((True, False), (True, False)):
                p = (0.9 if e1 else 0.1) * (0.9 if e2 else 0.1)
                eff = (a if e1 else STAY, b if e2 else STAY)
                nxt, rr = step(st, eff)
                r += p * rr
                inst.add_t(s, a, b, index[nxt], p)
            inst.add_r(s, a, b, r)
    for st in states:
        s2 = index[st]
        y = front(st[0], st[1], st[2])
        z = front(st[2], st[3], st[0])
        for a, b in itertools.product(range(4), range(4)):
            inst.add_o(s2, a, b, y, z, 1.0)
    return inst


def mars_rovers():
    inst = Instance("mars_rovers", """
        Mars rovers. Two rovers on a 2x2 grid of science sites. Sites at the
        top-left and bottom-right cells need both rovers drilling together
        (reward 6); the other two sites are sampled by a single rover (reward
        2). Experiments of the wrong kind or at finished sites cost 1. Moves
        succeed with probability 0.9. When all four sites are finished the
        mission restarts. A rover observes its own cell and whether that
        cell's site is finished.
    """)
    UP, DOWN, LEFT, RIGHT, SAMPLE, DRILL = range(6)
    inst.actions = (["up", "down", "left", "right", "sample", "drill"],) * 2
    obs = ["c%d-%s" % (c, d) for c in range(4) for d in ("todo", "done")]
    inst.observations = (obs, obs)
    drill_site = (True, False, False, True)
    states = list(itertools.product(range(4), range(4), range(16)))
    index = {st: i for i, st in enumerate(states)}
    inst.states = ["r%d-r%d-d%x" % st for st in states]
    start = (0, 3, 0)
    inst.start = {index[start]: 1.0}

    def move(cell, act):
        x, y = cell % 2, cell // 2
        if act == UP:
            y = 0
        elif act == DOWN:
            y = 1
        elif act == LEFT:
            x = 0
        elif act == RIGHT:
            x = 1
        return 2 * y + x

    for st in states:
        s = index[st]
        p1, p2, done = st
        for a, b in itertools.product(range(6), range(6)):
            r = 0.0
            newdone = done
            acts = (a, b)
            pos = (p1, p2)
            for i in range(2):
                site = pos[i]
                finished = bool(done >> site & 1)
                if acts[i] == SAMPLE:
                    if finished or drill_site[site]:
                        r -= 1.0
                    else:
                        newdone |= 1 << site
                elif acts[i] == DRILL:
                    if finished or not drill_site[site]:
                        r -= 1.0
                    elif not (acts[1 - i] == DRILL and pos[1 - i] == site):
                        r -= 1.0
                    else:
                        newdone |= 1 << site
            for site in range(4):
                if newdone >> site & 1 and not done >> site & 1:
                    r += 6.0 if drill_site[site] else 2.0
            inst.add_r(s, a, b, r)
            d1 = {p1: 1.0} if a >= SAMPLE else {move(p1, a): 0.9}
            if a < SAMPLE:
                d1[p1] = d1.get(p1, 0.0) + 0.1
            d2 = {p2: 1.0} if b >= SAMPLE else {move(p2, b): 0.9}
            if b < SAMPLE:
                d2[p2] = d2.get(p2, 0.0) + 0.1
            for n1, q1 in d1.items():
                for n2, q2 in d2.items():
                    nxt = start if newdone == 15 else (n1, n2, newdone)
                    inst.add_t(s, a, b, index[nxt], q1 * q2)
    for st in states:
        s2 = index[st]
        p1, p2, done = st
        y = 2 * p1 + (done >> p1 & 1)
        z = 2 * p2 + (done >> p2 & 1)
        for a, b in itertools.product(range(6), range(6)):
            inst.add_o(s2, a, b, y, z, 1.0)
    return inst


def main():
    outdir = sys.argv[1] if len(sys.argv) > 1 else os.path.join(
        os.path.dirname(os.path.abspath(__file__)), "..", "data", "benchmarks")
    os.makedirs(outdir, exist_ok=True)
    for build in (broadcast, dectiger, recycling, meeting_grid, box_pushing, mars_rovers):
        inst = build()
        path = os.path.join(outdir, inst.name + ".dpomdp")
        inst.write(path)
        print("%-14s |S|=%-4d |A|=%d |B|=%d |Y|=%d |Z|=%d -> %s" % (
            inst.name, len(inst.states), len(inst.actions[0]), len(inst.actions[1]),
            len(inst.observations[0]), len(inst.observations[1]), path))


if __name__ == "__main__":
    main()
