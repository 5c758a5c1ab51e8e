/**
 * Bundled scripted policies for the example rollout: enough to drive a
 * group of episodes end to end without a learned model.
 */

import { ClientSession, EpisodeHandle, StepOutcome } from './client.js';

export function toolCallText(think: string, name: string, parameters: Record<string, unknown>): string {
  const payload = JSON.stringify({ name, parameters });
  return `<think>${think}</think>\n<tool_call>\n${payload}\n</tool_call>`;
}

export function responseText(think: string, response: string): string {
  return `<think>${think}</think>\n<response>${response}</response>`;
}

export type PolicyKind = 'oracle' | 'no_tool';

interface VspGroundTruth {
  label: string | string[];
  cell_px: number;
  start: [number, number];
  candidate?: { moves: string[] };
}

function boxed(answer: string): string {
  return `\\boxed{${answer}}`;
}

function groundTruthAnswer(task: string, gt: Record<string, unknown>): string {
  if (task === 'vsp_nav') {
    return (gt.label as string[]).join(', ');
  }
  if (task === 'vsp_verify') {
    return gt.label === 'safe' ? 'Yes' : 'No';
  }
  return String(gt.label);
}

async function oracleVspVerify(session: ClientSession, handle: EpisodeHandle): Promise<StepOutcome> {
  const gt = handle.ground_truth as unknown as VspGroundTruth;
  const point = await session.step(
    handle.id,
    toolCallText('Anchor the candidate at the start cell.', 'Point', {
      image: 'img_1',
      description: 'the start point',
    }),
  );
  const coords = JSON.parse(point.observation.split('\n')[0]) as [number, number][];
  await session.step(
    handle.id,
    toolCallText('Overlay the candidate path.', 'Draw2DPath', {
      image: 'img_1',
      start: coords[0],
      directions: gt.candidate?.moves ?? [],
    }),
  );
  const word = gt.label === 'safe' ? 'Yes' : 'No';
  return session.step(handle.id, responseText('The overlay settles it.', boxed(word)));
}

async function oracleVspNav(session: ClientSession, handle: EpisodeHandle): Promise<StepOutcome> {
  const gt = handle.ground_truth as unknown as VspGroundTruth;
  const px = gt.cell_px;
  const targets = ['the start point', 'the goal point', 'the ice holes'];
  const observed: [number, number][][] = [];
  for (const target of targets) {
    const outcome = await session.step(
      handle.id,
      toolCallText(`Locate ${target}.`, 'Point', { image: 'img_1', description: target }),
    );
    observed.push(JSON.parse(outcome.observation.split('\n')[0]));
  }
  const toCell = ([x, y]: [number, number]) => [Math.floor(y / px), Math.floor(x / px)];
  const plan = await session.step(
    handle.id,
    toolCallText('Delegate pathfinding.', 'AStar', {
      start: toCell(observed[0][0]),
      goal: toCell(observed[1][0]),
      obstacles: observed[2].map(toCell),
    }),
  );
  const moves = JSON.parse(plan.observation.split('\n')[0]) as string[];
  await session.step(
    handle.id,
    toolCallText('Draw the route to confirm.', 'Draw2DPath', {
      image: 'img_1',
      start: observed[0][0],
      directions: moves,
    }),
  );
  return session.step(handle.id, responseText('Route verified.', boxed(moves.join(', '))));
}

/** Runs one episode to terminal state and returns the final outcome. */
export async function runPolicy(
  session: ClientSession,
  handle: EpisodeHandle,
  kind: PolicyKind,
): Promise<StepOutcome> {
  const task = String(handle.config.task);
  if (kind === 'no_tool') {
    const answer = groundTruthAnswer(task, handle.ground_truth);
    return session.step(handle.id, responseText('Answering directly.', boxed(answer)));
  }
  if (task === 'vsp_verify') {
    return oracleVspVerify(session, handle);
  }
  if (task === 'vsp_nav') {
    return oracleVspNav(session, handle);
  }
  throw new Error(`no bundled oracle for task ${task}`);
}
