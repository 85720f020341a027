// Deterministic in-memory stand-in for the inference service, used by tests.
// Every response is a pure function of the request body, which is exactly the
// statelessness contract the real server provides; images are content hashes
// so bit-identity checks are meaningful without a model.

import { FetchLike } from "./api.js";

function fnv(s: string): string {
  let h = 0x811c9dc5;
  for (let i = 0; i < s.length; i++) {
    h ^= s.charCodeAt(i);
    h = Math.imul(h, 0x01000193) >>> 0;
  }
  return h.toString(16).padStart(8, "0");
}

function rand(seedParts: unknown[]): number {
  // uniform in [-1, 1), pure function of its inputs
  const h = parseInt(fnv(JSON.stringify(seedParts)), 16);
  return (h / 0xffffffff) * 2 - 1;
}

interface Item {
  image: string;
  z: number[];
  label: number | null;
  soft_label: number[] | null;
}

const LATENT_DIM = 8;
const K = 4;

function renderItem(z: number[], label: number | null, soft: number[] | null): Item {
  return {
    image: `png_${fnv(JSON.stringify([z, label, soft]))}`,
    z,
    label,
    soft_label: soft,
  };
}

function handle(endpoint: string, body: any): unknown {
  if (endpoint === "/info") {
    return { latent_dim: LATENT_DIM, k: K, resolution: 16, conditioning: "lc" };
  }
  if (endpoint === "/direction/list") {
    return {
      directions: [
        { name: "round", has_z: true, has_label: true, n_positive: 30, n_negative: 30 },
        { name: "sharpen", has_z: true, has_label: false, n_positive: 40, n_negative: 42 },
      ],
    };
  }
  if (endpoint === "/generate") {
    const count = body.count ?? 1;
    const items: Item[] = [];
    for (let i = 0; i < count; i++) {
      const z = Array.from({ length: LATENT_DIM }, (_, j) => rand([body.seed, i, j]));
      const label = body.cluster ?? Math.abs(Math.round(rand([body.seed, i, "lab"]) * 100)) % K;
      items.push(renderItem(z, label, null));
    }
    return { op: "generate", seed: body.seed ?? 0, items };
  }
  if (endpoint === "/vicinity") {
    const count = body.count ?? 8;
    const cross = body.op === "vicinity_cross";
    const amount = body.amount ?? 1 / 3;
    const items: Item[] = [];
    for (let i = 0; i < count; i++) {
      const z = (body.z as number[]).map(
        (v: number, j: number) => v + amount * (rand([body.seed, i, j, "vic"]) - v),
      );
      const label = cross
        ? Math.abs(Math.round(rand([body.seed, i, "cross"]) * 100)) % K
        : (body.label ?? null);
      items.push(renderItem(z, label, cross ? null : (body.soft_label ?? null)));
    }
    return { op: cross ? "vicinity_cross" : "vicinity", seed: body.seed ?? 0, items };
  }
  if (endpoint === "/interpolate") {
    const t: number = body.amount;
    // endpoint contract: exact endpoints at t=0 and t=1
    const z =
      t === 0
        ? (body.z as number[]).slice()
        : t === 1
          ? (body.z2 as number[]).slice()
          : (body.z as number[]).map((v: number, j: number) => (1 - t) * v + t * (body.z2 as number[])[j]!);
    let label: number | null = body.label ?? null;
    let soft: number[] | null = body.soft_label ?? null;
    if (body.cluster !== undefined && body.cluster !== null) {
      if (t === 1) {
        label = body.cluster;
        soft = null;
      } else if (t > 0) {
        const from = new Array(K).fill(0);
        if (label !== null) from[label] = 1;
        const blend = from.map((v: number, j: number) => (1 - t) * v + (j === body.cluster ? t : 0));
        soft = blend;
        label = null;
      }
    }
    return { op: "interpolate", seed: body.seed ?? 0, items: [renderItem(z, label, soft)] };
  }
  if (endpoint === "/transfer") {
    const label = body.cluster ?? body.label ?? null;
    return {
      op: "transfer",
      seed: body.seed ?? 0,
      items: [renderItem((body.z as number[]).slice(), label, null)],
    };
  }
  if (endpoint === "/direction/apply") {
    const z = (body.z as number[]).map((v: number, j: number) => v + body.amount * rand([body.direction, j]));
    return {
      op: "direction_apply",
      seed: body.seed ?? 0,
      items: [renderItem(z, body.label ?? null, body.soft_label ?? null)],
    };
  }
  throw new Error(`fake service: unknown endpoint ${endpoint}`);
}

/** Fetch-compatible entry point; optionally records every request. */
export function fakeFetch(log?: Array<{ endpoint: string; body: unknown }>): FetchLike {
  return async (url: string, init?: RequestInit) => {
    const endpoint = url.replace(/^https?:\/\/[^/]+/, "");
    const body = init?.body ? JSON.parse(init.body as string) : {};
    if (log) log.push({ endpoint, body });
    const payload = handle(endpoint, body);
    return new Response(JSON.stringify(payload), {
      status: 200,
      headers: { "content-type": "application/json" },
    });
  };
}
