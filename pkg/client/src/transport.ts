/**
 * HTTP transport with replay support.
 *
 * Retries apply only to transport failures (connection refused, timeouts);
 * any HTTP response, including error statuses, is a protocol-level outcome
 * and is surfaced to the caller untouched.
 */

export interface HttpResponse {
  status: number;
  json?: unknown;
  bytes?: Uint8Array;
}

export interface Transport {
  request(method: string, path: string, body?: unknown): Promise<HttpResponse>;
}

export class TransportError extends Error {
  constructor(message: string) {
    super(message);
    this.name = 'TransportError';
  }
}

export interface FetchTransportOptions {
  timeoutMs?: number;
  retries?: number;
  retryBaseMs?: number;
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

export class FetchTransport implements Transport {
  constructor(
    private baseUrl: string,
    private opts: FetchTransportOptions = {},
  ) {
    this.baseUrl = baseUrl.replace(/\/+$/, '');
  }

  async request(method: string, path: string, body?: unknown): Promise<HttpResponse> {
    const { timeoutMs = 30_000, retries = 3, retryBaseMs = 100 } = this.opts;
    let attempt = 0;
    for (;;) {
      try {
        const resp = await fetch(this.baseUrl + path, {
          method,
          headers: body !== undefined ? { 'content-type': 'application/json' } : undefined,
          body: body !== undefined ? JSON.stringify(body) : undefined,
          signal: AbortSignal.timeout(timeoutMs),
        });
        const contentType = resp.headers.get('content-type') ?? '';
        if (contentType.includes('application/json')) {
          return { status: resp.status, json: await resp.json() };
        }
        return { status: resp.status, bytes: new Uint8Array(await resp.arrayBuffer()) };
      } catch (err) {
        // fetch rejects only on transport-level problems
        if (attempt >= retries) {
          throw new TransportError(`${method} ${path} failed after ${attempt + 1} attempts: ${err}`);
        }
        await sleep(retryBaseMs * 2 ** attempt);
        attempt += 1;
      }
    }
  }
}

/** One request/response pair of a recorded session. */
export interface Exchange {
  method: string;
  path: string;
  body?: unknown;
  status: number;
  json?: unknown;
  bytesBase64?: string;
}

/** Wraps a transport and records every exchange for later replay. */
export class RecordingTransport implements Transport {
  readonly log: Exchange[] = [];

  constructor(private inner: Transport) {}

  async request(method: string, path: string, body?: unknown): Promise<HttpResponse> {
    const resp = await this.inner.request(method, path, body);
    this.log.push({
      method,
      path,
      body,
      status: resp.status,
      json: resp.json,
      bytesBase64: resp.bytes ? Buffer.from(resp.bytes).toString('base64') : undefined,
    });
    return resp;
  }
}

/** Serves a recorded log back, verifying the request sequence matches. */
export class ReplayTransport implements Transport {
  private cursor = 0;

  constructor(private log: Exchange[]) {}

  async request(method: string, path: string, body?: unknown): Promise<HttpResponse> {
    const expected = this.log[this.cursor];
    if (!expected) {
      throw new TransportError(`replay exhausted at request ${this.cursor}: ${method} ${path}`);
    }
    if (expected.method !== method || expected.path !== path ||
        JSON.stringify(expected.body) !== JSON.stringify(body)) {
      throw new TransportError(
        `replay mismatch at ${this.cursor}: recorded ${expected.method} ${expected.path}, got ${method} ${path}`,
      );
    }
    this.cursor += 1;
    return {
      status: expected.status,
      json: expected.json,
      bytes: expected.bytesBase64 ? new Uint8Array(Buffer.from(expected.bytesBase64, 'base64')) : undefined,
    };
  }
}
