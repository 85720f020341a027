// Design-session state: the current logo (full latent payload), the candidate
// ring, the preview, an unbounded undo/redo history, and a replayable session
// journal. All state lives client-side; the service stays stateless.

import {
  DirectionInfo,
  ImageItem,
  Info,
  OpResponse,
  StudioClient,
} from "./api.js";

export interface LogoState {
  z: number[];
  label: number | null;
  softLabel: number[] | null;
  image: string;
}

export type CandidateMode = "vicinity" | "transfer";

// Journal entries: every service request (with its role in the session) plus
// the local actions needed to rebuild the exact final state. Requests carry
// their seeds, so replaying the journal against the same checkpoint reissues
// byte-identical calls and yields a bit-identical final logo.
export type JournalStep =
  | { kind: "request"; role: "init" | "candidates" | "preview"; endpoint: string; body: Record<string, unknown> }
  | { kind: "select"; index: number }
  | { kind: "commit" }
  | { kind: "undo" }
  | { kind: "redo" };

function itemToState(item: ImageItem): LogoState {
  return {
    z: item.z.slice(),
    label: item.label ?? null,
    softLabel: item.soft_label ? item.soft_label.slice() : null,
    image: item.image,
  };
}

// deterministic client-side seed stream (mulberry32)
export function seedStream(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) % 2147483647;
  };
}

export class DesignStore {
  info: Info | null = null;
  directions: DirectionInfo[] = [];
  current: LogoState | null = null;
  candidates: ImageItem[] = [];
  candidateMode: CandidateMode = "vicinity";
  selected: number | null = null;
  amount = 1 / 3; // mirrors the vicinity step
  preview: LogoState | null = null;
  history: LogoState[] = [];
  future: LogoState[] = [];
  journal: JournalStep[] = [];

  private nextSeed: () => number;
  private seq = { candidates: 0, preview: 0 };
  listeners: Array<() => void> = [];

  constructor(
    readonly client: StudioClient,
    sessionSeed = 1,
  ) {
    this.nextSeed = seedStream(sessionSeed);
  }

  private emit() {
    for (const fn of this.listeners) fn();
  }

  subscribe(fn: () => void): () => void {
    this.listeners.push(fn);
    return () => {
      this.listeners = this.listeners.filter((f) => f !== fn);
    };
  }

  private async request(
    role: "init" | "candidates" | "preview",
    endpoint: string,
    body: Record<string, unknown>,
  ): Promise<OpResponse> {
    const resp = await this.client.post<OpResponse>(endpoint, body);
    this.journal.push({ kind: "request", role, endpoint, body });
    return resp;
  }

  async start(): Promise<void> {
    this.info = await this.client.info();
    this.directions = await this.client.directions();
    const resp = await this.request("init", "/generate", { count: 1, seed: this.nextSeed() });
    this.current = itemToState(resp.items[0]!);
    this.history = [];
    this.future = [];
    this.emit();
  }

  private labelFields(state: LogoState): Record<string, unknown> {
    if (this.info && this.info.conditioning === "none") return {};
    if (state.softLabel) return { soft_label: state.softLabel };
    return { label: state.label };
  }

  async loadCandidates(mode: CandidateMode): Promise<void> {
    if (!this.current) throw new Error("no current logo");
    this.candidateMode = mode;
    this.selected = null;
    this.preview = null;
    const seq = ++this.seq.candidates;
    const body: Record<string, unknown> = {
      z: this.current.z,
      ...this.labelFields(this.current),
      count: 8,
      seed: this.nextSeed(),
    };
    if (mode === "vicinity") {
      body.amount = 1 / 3;
    } else {
      // class-transfer ring: same z rendered under freshly drawn clusters
      body.op = "vicinity_cross";
      body.amount = 0;
    }
    const resp = await this.request("candidates", "/vicinity", body);
    if (seq !== this.seq.candidates) return; // stale response
    this.candidates = resp.items;
    this.emit();
  }

  select(index: number): void {
    if (index < 0 || index >= this.candidates.length) throw new Error("no such candidate");
    this.selected = index;
    this.journal.push({ kind: "select", index });
    this.emit();
  }

  /** Preview = service-side matched interpolation current -> candidate. */
  async previewAmount(amount: number): Promise<LogoState> {
    if (!this.current) throw new Error("no current logo");
    if (this.selected === null) throw new Error("no candidate selected");
    this.amount = amount;
    const cand = this.candidates[this.selected]!;
    const seq = ++this.seq.preview;
    const body: Record<string, unknown> = {
      z: this.current.z,
      z2: cand.z,
      amount,
      ...this.labelFields(this.current),
    };
    if (cand.label !== null && cand.label !== undefined && cand.label !== this.current.label) {
      body.cluster = cand.label;
    }
    const resp = await this.request("preview", "/interpolate", body);
    const state = itemToState(resp.items[0]!);
    if (seq === this.seq.preview) {
      this.preview = state;
      this.emit();
    }
    return state;
  }

  /** Preview a semantic slider via /direction/apply. */
  async previewDirection(name: string, amount: number, space: "latent" | "label" | "both"): Promise<LogoState> {
    if (!this.current) throw new Error("no current logo");
    const body: Record<string, unknown> = {
      z: this.current.z,
      direction: name,
      amount,
      space,
      ...this.labelFields(this.current),
    };
    const resp = await this.request("preview", "/direction/apply", body);
    const state = itemToState(resp.items[0]!);
    this.preview = state;
    this.emit();
    return state;
  }

  /** Commit the preview: push the old state onto the undo stack. */
  commit(): void {
    if (!this.preview || !this.current) throw new Error("nothing to commit");
    this.history.push(this.current);
    this.future = [];
    this.current = this.preview;
    this.preview = null;
    this.selected = null;
    this.candidates = [];
    this.journal.push({ kind: "commit" });
    this.emit();
  }

  undo(): void {
    const prev = this.history.pop();
    if (!prev || !this.current) return;
    this.future.push(this.current);
    this.current = prev;
    this.preview = null;
    this.selected = null;
    this.candidates = [];
    this.journal.push({ kind: "undo" });
    this.emit();
  }

  redo(): void {
    const next = this.future.pop();
    if (!next || !this.current) return;
    this.history.push(this.current);
    this.current = next;
    this.journal.push({ kind: "redo" });
    this.emit();
  }
}

/**
 * Replay a recorded journal against a (same-checkpoint) service and return
 * the final logo state. Requests are reissued verbatim; local steps replay
 * the same state transitions the live session performed.
 */
export async function replayJournal(client: StudioClient, journal: JournalStep[]): Promise<LogoState | null> {
  let current: LogoState | null = null;
  let lastPreview: LogoState | null = null;
  const history: LogoState[] = [];
  const future: LogoState[] = [];
  for (const step of journal) {
    if (step.kind === "request") {
      const resp = await client.post<OpResponse>(step.endpoint, step.body);
      if (step.role === "init") {
        current = itemToState(resp.items[0]!);
      } else if (step.role === "preview") {
        lastPreview = itemToState(resp.items[0]!);
      }
    } else if (step.kind === "commit") {
      if (current) history.push(current);
      future.length = 0;
      current = lastPreview;
      lastPreview = null;
    } else if (step.kind === "undo") {
      const prev = history.pop();
      if (prev && current) {
        future.push(current);
        current = prev;
      }
    } else if (step.kind === "redo") {
      const next = future.pop();
      if (next && current) {
        history.push(current);
        current = next;
      }
    }
    // select steps carry no state of their own
  }
  return current;
}
