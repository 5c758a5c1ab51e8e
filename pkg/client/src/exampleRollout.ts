/**
 * Runnable example: roll a group of n episodes over one instance, fetch
 * the terminal reward breakdowns, normalize them into group-relative
 * advantages client-side, and print the table a training stack would see.
 */

import { groupAdvantages } from './advantages.js';
import { ClientSession, EpisodeConfig, RewardBreakdown } from './client.js';
import { PolicyKind, runPolicy } from './policies.js';

export interface RolloutRow {
  episodeId: string;
  policy: PolicyKind;
  answerCorrect: boolean;
  breakdown: RewardBreakdown;
  reward: number;
  advantage: number;
}

export interface RolloutResult {
  rows: RolloutRow[];
  rewards: number[];
  advantages: number[];
}

export interface ExampleRolloutOptions {
  /** assign policies across the group; default all-oracle */
  policyMix?: PolicyKind[];
  deleteEpisodes?: boolean;
  print?: (line: string) => void;
}

export async function exampleRollout(
  session: ClientSession,
  task: string,
  n: number,
  cfg: Partial<EpisodeConfig> = {},
  opts: ExampleRolloutOptions = {},
): Promise<RolloutResult> {
  if (n < 2) {
    throw new Error(`a reward group needs >= 2 episodes, got ${n}`);
  }
  const print = opts.print ?? ((line: string) => console.log(line));
  const mix = opts.policyMix ?? Array<PolicyKind>(n).fill('oracle');
  if (mix.length !== n) {
    throw new Error(`policyMix has ${mix.length} entries for n=${n}`);
  }

  const handles = await session.createGroup({ task, seed: 0, ...cfg }, n);
  const rows: RolloutRow[] = [];
  for (let i = 0; i < n; i += 1) {
    const final = await runPolicy(session, handles[i], mix[i]);
    if (final.status !== 'terminal' || final.breakdown === null) {
      throw new Error(`episode ${handles[i].id} did not reach a terminal breakdown`);
    }
    rows.push({
      episodeId: handles[i].id,
      policy: mix[i],
      answerCorrect: final.answer_correct === true,
      breakdown: final.breakdown,
      reward: final.breakdown.total,
      advantage: 0,
    });
  }

  const rewards = rows.map((r) => r.reward);
  const advantages = groupAdvantages(rewards);
  rows.forEach((row, i) => {
    row.advantage = advantages[i];
  });

  print(`group rollout: task=${task} n=${n}`);
  print('episode      policy    correct  reward    advantage');
  for (const row of rows) {
    print(
      `${row.episodeId.padEnd(12)} ${row.policy.padEnd(9)} ${String(row.answerCorrect).padEnd(8)} ` +
        `${row.reward.toFixed(4).padStart(8)}  ${row.advantage >= 0 ? '+' : ''}${row.advantage.toFixed(6)}`,
    );
  }

  if (opts.deleteEpisodes ?? true) {
    for (const handle of handles) {
      await session.deleteEpisode(handle.id);
    }
  }
  return { rows, rewards, advantages };
}
