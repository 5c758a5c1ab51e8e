/**
 * Thin session over the episode server's wire protocol.
 *
 * Every method mirrors one endpoint with no client-side semantics; server
 * error bodies ({"error_kind": ...}) are surfaced verbatim as GymError.
 */

import { FetchTransport, FetchTransportOptions, HttpResponse, Transport } from './transport.js';

export interface RewardConfig {
  lambda_tool?: number;
  lambda_acc?: number;
  acc_scale?: number;
  adaptive?: boolean;
}

export interface EpisodeConfig {
  task: string;
  seed?: number;
  size?: number;
  hole_count?: number | null;
  cell_px?: number;
  source_px?: number;
  gui_elements?: number;
  reward?: RewardConfig;
  randomize_seed?: number | null;
  max_turns?: number;
  verify_require_goal?: boolean;
}

export interface EpisodeHandle {
  id: string;
  system_prompt: string;
  user_prompt: string;
  image_ids: string[];
  config: Record<string, unknown>;
  ground_truth: Record<string, unknown>;
}

export interface RewardBreakdown {
  format: number;
  per_call_scores: number[];
  tool: number;
  acc: number;
  total: number;
  turn_count: number;
}

export interface StepOutcome {
  status: 'tool_observation' | 'terminal' | 'protocol_error';
  observation: string;
  new_image_id: string | null;
  breakdown: RewardBreakdown | null;
  answer_correct: boolean | null;
  turn_index: number;
  format_ok: boolean;
  tool_ok: boolean | null;
}

export class GymError extends Error {
  constructor(
    readonly errorKind: string,
    readonly status: number,
    detail: string,
  ) {
    super(`${errorKind} (${status}): ${detail}`);
    this.name = 'GymError';
  }
}

function check(resp: HttpResponse): unknown {
  if (resp.status >= 400) {
    const body = (resp.json ?? {}) as Record<string, unknown>;
    throw new GymError(
      String(body.error_kind ?? 'Unknown'),
      resp.status,
      String(body.detail ?? ''),
    );
  }
  return resp.json;
}

export class ClientSession {
  readonly transport: Transport;

  constructor(baseUrlOrTransport: string | Transport, opts?: FetchTransportOptions) {
    this.transport =
      typeof baseUrlOrTransport === 'string'
        ? new FetchTransport(baseUrlOrTransport, opts)
        : baseUrlOrTransport;
  }

  async createEpisode(cfg: EpisodeConfig): Promise<EpisodeHandle> {
    return check(await this.transport.request('POST', '/episodes', cfg)) as EpisodeHandle;
  }

  async createGroup(cfg: EpisodeConfig, n: number): Promise<EpisodeHandle[]> {
    const body = { ...cfg, n };
    const payload = check(await this.transport.request('POST', '/episodes/group', body));
    return (payload as { episodes: EpisodeHandle[] }).episodes;
  }

  async step(episodeId: string, text: string): Promise<StepOutcome> {
    return check(
      await this.transport.request('POST', `/episodes/${episodeId}/step`, { text }),
    ) as StepOutcome;
  }

  async getEpisode(episodeId: string): Promise<Record<string, unknown>> {
    return check(await this.transport.request('GET', `/episodes/${episodeId}`)) as Record<
      string,
      unknown
    >;
  }

  async getImage(imageId: string): Promise<Uint8Array> {
    const resp = await this.transport.request('GET', `/images/${imageId}`);
    if (resp.status >= 400) {
      check(resp);
    }
    return resp.bytes ?? new Uint8Array();
  }

  async listTools(seed?: number): Promise<Record<string, unknown>[]> {
    const query = seed === undefined ? '' : `?seed=${seed}`;
    const payload = check(await this.transport.request('GET', `/tools${query}`));
    return (payload as { tools: Record<string, unknown>[] }).tools;
  }

  async metrics(): Promise<Record<string, unknown>> {
    return check(await this.transport.request('GET', '/metrics')) as Record<string, unknown>;
  }

  async deleteEpisode(episodeId: string): Promise<void> {
    check(await this.transport.request('DELETE', `/episodes/${episodeId}`));
  }
}
