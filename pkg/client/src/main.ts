/**
 * CLI wrapper around the example rollout.
 *
 *   node dist/main.js --server http://127.0.0.1:8321 --task vsp_verify --n 4 --mixed
 */

import { ClientSession } from './client.js';
import { exampleRollout } from './exampleRollout.js';
import { PolicyKind } from './policies.js';

function argValue(flag: string, fallback: string): string {
  const idx = process.argv.indexOf(flag);
  return idx >= 0 && idx + 1 < process.argv.length ? process.argv[idx + 1] : fallback;
}

async function main(): Promise<void> {
  const server = argValue('--server', 'http://127.0.0.1:8321');
  const task = argValue('--task', 'vsp_verify');
  const n = Number(argValue('--n', '4'));
  const seed = Number(argValue('--seed', '0'));
  const mixed = process.argv.includes('--mixed');

  const session = new ClientSession(server);
  const policyMix: PolicyKind[] | undefined = mixed
    ? Array.from({ length: n }, (_, i) => (i % 2 === 0 ? 'oracle' : 'no_tool'))
    : undefined;
  await exampleRollout(session, task, n, { seed }, { policyMix });
}

main().catch((err) => {
  console.error(String(err));
  process.exit(1);
});
