// Unified diff that reproduces the engine's output byte for byte, so the
// preview shown before submitting a direct edit can be verified against
// the diff the engine stores in the direct-edit event.
//
// The engine diffs line lists split with keepends semantics and renders
// groups of opcodes with 3 lines of context and no timestamps. The match
// selection below (longest match, leftmost on ties, with the >=200-line
// popularity cutoff) mirrors the reference implementation exactly; the
// parity test in this repo cross-checks generated cases against it.

type Opcode = ["replace" | "delete" | "insert" | "equal", number, number, number, number];

export function splitKeepEnds(text: string): string[] {
  const out: string[] = [];
  let start = 0;
  for (let i = 0; i < text.length; i++) {
    const ch = text[i];
    if (ch === "\n") {
      out.push(text.slice(start, i + 1));
      start = i + 1;
    } else if (ch === "\r") {
      const end = text[i + 1] === "\n" ? i + 2 : i + 1;
      out.push(text.slice(start, end));
      start = end;
      i = end - 1;
    }
  }
  if (start < text.length) out.push(text.slice(start));
  return out;
}

class Matcher {
  private a: string[];
  private b: string[];
  private b2j = new Map<string, number[]>();

  constructor(a: string[], b: string[]) {
    this.a = a;
    this.b = b;
    for (let i = 0; i < b.length; i++) {
      const indices = this.b2j.get(b[i]);
      if (indices) indices.push(i);
      else this.b2j.set(b[i], [i]);
    }
    // drop overly popular lines from matching when the file is large
    if (b.length >= 200) {
      const cutoff = Math.floor(b.length / 100) + 1;
      for (const [element, indices] of this.b2j) {
        if (indices.length > cutoff) this.b2j.delete(element);
      }
    }
  }

  private findLongestMatch(
    alo: number, ahi: number, blo: number, bhi: number
  ): [number, number, number] {
    const { a, b, b2j } = this;
    let besti = alo;
    let bestj = blo;
    let bestsize = 0;
    let j2len = new Map<number, number>();
    for (let i = alo; i < ahi; i++) {
      const newj2len = new Map<number, number>();
      const indices = b2j.get(a[i]);
      if (indices) {
        for (const j of indices) {
          if (j < blo) continue;
          if (j >= bhi) break;
          const k = (j2len.get(j - 1) ?? 0) + 1;
          newj2len.set(j, k);
          if (k > bestsize) {
            besti = i - k + 1;
            bestj = j - k + 1;
            bestsize = k;
          }
        }
      }
      j2len = newj2len;
    }
    // extend over lines excluded from b2j by the popularity cutoff
    while (besti > alo && bestj > blo && a[besti - 1] === b[bestj - 1]) {
      besti -= 1;
      bestj -= 1;
      bestsize += 1;
    }
    while (
      besti + bestsize < ahi &&
      bestj + bestsize < bhi &&
      a[besti + bestsize] === b[bestj + bestsize]
    ) {
      bestsize += 1;
    }
    return [besti, bestj, bestsize];
  }

  matchingBlocks(): [number, number, number][] {
    const queue: [number, number, number, number][] = [
      [0, this.a.length, 0, this.b.length],
    ];
    const blocks: [number, number, number][] = [];
    while (queue.length) {
      const [alo, ahi, blo, bhi] = queue.pop()!;
      const [i, j, k] = this.findLongestMatch(alo, ahi, blo, bhi);
      if (k) {
        blocks.push([i, j, k]);
        if (alo < i && blo < j) queue.push([alo, i, blo, j]);
        if (i + k < ahi && j + k < bhi) queue.push([i + k, ahi, j + k, bhi]);
      }
    }
    blocks.sort((x, y) => x[0] - y[0] || x[1] - y[1]);
    const merged: [number, number, number][] = [];
    let [i1, j1, k1] = [0, 0, 0];
    for (const [i2, j2, k2] of blocks) {
      if (i1 + k1 === i2 && j1 + k1 === j2) {
        k1 += k2;
      } else {
        if (k1) merged.push([i1, j1, k1]);
        [i1, j1, k1] = [i2, j2, k2];
      }
    }
    if (k1) merged.push([i1, j1, k1]);
    merged.push([this.a.length, this.b.length, 0]);
    return merged;
  }

  opcodes(): Opcode[] {
    let i = 0;
    let j = 0;
    const answer: Opcode[] = [];
    for (const [ai, bj, size] of this.matchingBlocks()) {
      let tag: Opcode[0] | "" = "";
      if (i < ai && j < bj) tag = "replace";
      else if (i < ai) tag = "delete";
      else if (j < bj) tag = "insert";
      if (tag) answer.push([tag, i, ai, j, bj]);
      i = ai + size;
      j = bj + size;
      if (size) answer.push(["equal", ai, i, bj, j]);
    }
    return answer;
  }

  groupedOpcodes(n = 3): Opcode[][] {
    let codes = this.opcodes();
    if (!codes.length) codes = [["equal", 0, 1, 0, 1]];
    if (codes[0][0] === "equal") {
      const [tag, i1, i2, j1, j2] = codes[0];
      codes[0] = [tag, Math.max(i1, i2 - n), i2, Math.max(j1, j2 - n), j2];
    }
    if (codes[codes.length - 1][0] === "equal") {
      const [tag, i1, i2, j1, j2] = codes[codes.length - 1];
      codes[codes.length - 1] = [tag, i1, Math.min(i2, i1 + n), j1, Math.min(j2, j1 + n)];
    }
    const groups: Opcode[][] = [];
    let group: Opcode[] = [];
    for (const [tag, i1, i2, j1, j2] of codes) {
      if (tag === "equal" && i2 - i1 > 2 * n) {
        group.push([tag, i1, Math.min(i2, i1 + n), j1, Math.min(j2, j1 + n)]);
        groups.push(group);
        group = [[tag, Math.max(i1, i2 - n), i2, Math.max(j1, j2 - n), j2]];
      } else {
        group.push([tag, i1, i2, j1, j2]);
      }
    }
    if (group.length && !(group.length === 1 && group[0][0] === "equal")) {
      groups.push(group);
    }
    return groups;
  }
}

function formatRange(start: number, stop: number): string {
  const beg = start + 1;
  const length = stop - start;
  if (length === 1) return `${beg}`;
  return `${length === 0 ? beg - 1 : beg},${length}`;
}

export function unifiedDiff(before: string, after: string, name = "artifact"): string {
  const a = splitKeepEnds(before);
  const b = splitKeepEnds(after);
  const pieces: string[] = [];
  let started = false;
  for (const group of new Matcher(a, b).groupedOpcodes(3)) {
    if (!started) {
      started = true;
      pieces.push(`--- a/${name}\n`, `+++ b/${name}\n`);
    }
    const first = group[0];
    const last = group[group.length - 1];
    const range1 = formatRange(first[1], last[2]);
    const range2 = formatRange(first[3], last[4]);
    pieces.push(`@@ -${range1} +${range2} @@\n`);
    for (const [tag, i1, i2, j1, j2] of group) {
      if (tag === "equal") {
        for (const line of a.slice(i1, i2)) pieces.push(" " + line);
        continue;
      }
      if (tag === "replace" || tag === "delete") {
        for (const line of a.slice(i1, i2)) pieces.push("-" + line);
      }
      if (tag === "replace" || tag === "insert") {
        for (const line of b.slice(j1, j2)) pieces.push("+" + line);
      }
    }
  }
  return pieces.join("");
}
