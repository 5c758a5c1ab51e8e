/**
 * End-to-end tests against a real server process. The server is spawned
 * from the installed Python package; all checks run over actual sockets.
 */

import { ChildProcess, execFileSync, spawn } from 'node:child_process';
import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import { ClientSession, GymError } from '../src/client.js';
import { exampleRollout } from '../src/exampleRollout.js';
import { RecordingTransport, FetchTransport, ReplayTransport, TransportError } from '../src/transport.js';

const PORT = 18000 + Math.floor(Math.random() * 10000);
const BASE = `http://127.0.0.1:${PORT}`;

let server: ChildProcess;

async function waitForServer(): Promise<void> {
  for (let i = 0; i < 200; i += 1) {
    try {
      const resp = await fetch(`${BASE}/metrics`, { signal: AbortSignal.timeout(500) });
      if (resp.ok) return;
    } catch {
      await new Promise((r) => setTimeout(r, 100));
    }
  }
  throw new Error('server did not come up');
}

beforeAll(async () => {
  server = spawn('python3', ['-m', 'toolgym.cli', 'serve', '--port', String(PORT)], {
    stdio: 'ignore',
  });
  await waitForServer();
}, 60_000);

afterAll(() => {
  server?.kill();
});

describe('example rollout against a live server', () => {
  it('n=4 oracle group on vsp_verify: equal rewards, zero advantages', async () => {
    const session = new ClientSession(BASE);
    const lines: string[] = [];
    const result = await exampleRollout(
      session,
      'vsp_verify',
      4,
      { seed: 11 },
      { print: (l) => lines.push(l) },
    );
    expect(result.rewards).toHaveLength(4);
    expect(new Set(result.rewards).size).toBe(1); // same instance, same policy
    expect(result.advantages).toEqual([0, 0, 0, 0]);
    expect(result.rows.every((r) => r.answerCorrect)).toBe(true);
    expect(lines.some((l) => l.includes('advantage'))).toBe(true);
  }, 30_000);

  it('n=4 mixed oracle/no_tool: nonzero spread, oracle ranked above no_tool', async () => {
    const session = new ClientSession(BASE);
    const result = await exampleRollout(
      session,
      'vsp_verify',
      4,
      { seed: 13 },
      { policyMix: ['oracle', 'no_tool', 'oracle', 'no_tool'], print: () => {} },
    );
    const oracleAdv = result.rows.filter((r) => r.policy === 'oracle').map((r) => r.advantage);
    const noToolAdv = result.rows.filter((r) => r.policy === 'no_tool').map((r) => r.advantage);
    expect(Math.max(...noToolAdv)).toBeLessThan(Math.min(...oracleAdv));
    expect(result.advantages.some((a) => a !== 0)).toBe(true);
  }, 30_000);

  it('vsp_nav oracle works end to end', async () => {
    const session = new ClientSession(BASE);
    const result = await exampleRollout(
      session,
      'vsp_nav',
      2,
      { seed: 21, size: 4 },
      { print: () => {} },
    );
    expect(result.rows.every((r) => r.answerCorrect)).toBe(true);
    expect(result.rows.every((r) => r.breakdown.per_call_scores.every((s) => s === 4))).toBe(true);
  }, 30_000);

  it('n=1 is rejected: a group needs at least two members', async () => {
    const session = new ClientSession(BASE);
    await expect(exampleRollout(session, 'vsp_verify', 1)).rejects.toThrow(/>= 2/);
  });

  it('client-side advantages match the server-side reference within 1e-9', async () => {
    const session = new ClientSession(BASE);
    const result = await exampleRollout(
      session,
      'vsp_verify',
      4,
      { seed: 29 },
      { policyMix: ['oracle', 'no_tool', 'oracle', 'no_tool'], print: () => {} },
    );
    const py = execFileSync('python3', [
      '-c',
      'import json,sys; from toolgym.grpo import RewardGroup, group_advantages; ' +
        'print(json.dumps(group_advantages(RewardGroup(json.loads(sys.argv[1])))))',
      JSON.stringify(result.rewards),
    ]);
    const reference = JSON.parse(py.toString()) as number[];
    for (let i = 0; i < reference.length; i += 1) {
      expect(Math.abs(result.advantages[i] - reference[i])).toBeLessThan(1e-9);
    }
  }, 30_000);
});

describe('wire behavior', () => {
  it('surfaces server error kinds verbatim', async () => {
    const session = new ClientSession(BASE);
    await expect(
      session.createEpisode({ task: 'vsp_nav', size: 3, hole_count: 8 }),
    ).rejects.toSatisfy((err: unknown) => {
      return err instanceof GymError && err.errorKind === 'InfeasibleConfig';
    });
  });

  it('reports a transport error for a dead server without retry storms', async () => {
    const session = new ClientSession('http://127.0.0.1:9', { retries: 1, timeoutMs: 300 });
    await expect(session.metrics()).rejects.toThrow(TransportError);
  });

  it('recorded live transcript replays to identical outputs', async () => {
    const recorder = new RecordingTransport(new FetchTransport(BASE));
    const liveSession = new ClientSession(recorder);
    const handle = await liveSession.createEpisode({ task: 'vsp_verify', seed: 37 });
    const gt = handle.ground_truth as { label?: string };
    const answer = gt.label === 'safe' ? 'Yes' : 'No';
    const liveOutcome = await liveSession.step(
      handle.id,
      `<think>judge</think><response>\\boxed{${answer}}</response>`,
    );
    const liveSnapshot = await liveSession.getEpisode(handle.id);
    const livePng = await liveSession.getImage(handle.image_ids[0]);
    await liveSession.deleteEpisode(handle.id);

    const replaySession = new ClientSession(new ReplayTransport(recorder.log));
    const replayHandle = await replaySession.createEpisode({ task: 'vsp_verify', seed: 37 });
    expect(replayHandle).toEqual(handle);
    const replayOutcome = await replaySession.step(
      handle.id,
      `<think>judge</think><response>\\boxed{${answer}}</response>`,
    );
    expect(replayOutcome).toEqual(liveOutcome);
    const replaySnapshot = await replaySession.getEpisode(handle.id);
    expect(replaySnapshot).toEqual(liveSnapshot);
    const replayPng = await replaySession.getImage(handle.image_ids[0]);
    expect(Buffer.from(replayPng).equals(Buffer.from(livePng))).toBe(true);
  }, 30_000);

  it('lists seven canonical tools and preserves structure under a seed', async () => {
    const session = new ClientSession(BASE);
    const canonical = await session.listTools();
    const randomized = await session.listTools(99);
    expect(canonical).toHaveLength(7);
    expect(randomized).toHaveLength(7);
    for (let i = 0; i < 7; i += 1) {
      expect(randomized[i].name).not.toBe(canonical[i].name);
      const cParams = canonical[i].parameters as { kind: string }[];
      const rParams = randomized[i].parameters as { kind: string }[];
      expect(rParams.map((p) => p.kind)).toEqual(cParams.map((p) => p.kind));
    }
  });
});
