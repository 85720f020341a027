// Wire-protocol client for the studio service. The UI never computes model
// math locally: every pixel it shows came out of one of these calls.

export interface ImageItem {
  image: string; // base64 PNG
  z: number[];
  label?: number | null;
  soft_label?: number[] | null;
}

export interface OpResponse {
  op: string;
  seed: number;
  items: ImageItem[];
}

export interface Info {
  latent_dim: number;
  k: number;
  resolution: number;
  conditioning: string;
}

export interface DirectionInfo {
  name: string;
  has_z: boolean;
  has_label: boolean;
  n_positive: number;
  n_negative: number;
}

export interface GenerateBody {
  op?: string;
  count?: number;
  cluster?: number | null;
  seed?: number | null;
}

export interface VicinityBody {
  op?: string;
  z: number[];
  label?: number | null;
  soft_label?: number[] | null;
  amount?: number;
  count?: number;
  seed?: number | null;
}

export interface InterpolateBody {
  op?: string;
  z: number[];
  z2: number[];
  steps?: number | null;
  amount?: number | null;
  label?: number | null;
  soft_label?: number[] | null;
  cluster?: number | null;
  seed?: number | null;
}

export interface TransferBody {
  op?: string;
  z: number[];
  label?: number | null;
  soft_label?: number[] | null;
  cluster?: number | null;
  seed?: number | null;
}

export interface DirectionApplyBody {
  op?: string;
  z: number[];
  direction: string;
  amount: number;
  space: "latent" | "label" | "both";
  label?: number | null;
  soft_label?: number[] | null;
  seed?: number | null;
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ServiceError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

export class StudioClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (...args) => fetch(...args),
  ) {}

  private async get<T>(endpoint: string): Promise<T> {
    const res = await this.fetchImpl(`${this.baseUrl}${endpoint}`);
    if (!res.ok) throw new ServiceError(res.status, await res.text());
    return (await res.json()) as T;
  }

  async post<T>(endpoint: string, body: unknown): Promise<T> {
    const res = await this.fetchImpl(`${this.baseUrl}${endpoint}`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!res.ok) throw new ServiceError(res.status, await res.text());
    return (await res.json()) as T;
  }

  info(): Promise<Info> {
    return this.get<Info>("/info");
  }

  async directions(): Promise<DirectionInfo[]> {
    const res = await this.get<{ directions: DirectionInfo[] }>("/direction/list");
    return res.directions;
  }

  generate(body: GenerateBody): Promise<OpResponse> {
    return this.post<OpResponse>("/generate", body);
  }

  vicinity(body: VicinityBody): Promise<OpResponse> {
    return this.post<OpResponse>("/vicinity", body);
  }

  interpolate(body: InterpolateBody): Promise<OpResponse> {
    return this.post<OpResponse>("/interpolate", body);
  }

  transfer(body: TransferBody): Promise<OpResponse> {
    return this.post<OpResponse>("/transfer", body);
  }

  directionApply(body: DirectionApplyBody): Promise<OpResponse> {
    return this.post<OpResponse>("/direction/apply", body);
  }
}
