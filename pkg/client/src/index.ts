export { groupAdvantages, DegenerateGroupError } from './advantages.js';
export {
  ClientSession,
  GymError,
  type EpisodeConfig,
  type EpisodeHandle,
  type RewardBreakdown,
  type StepOutcome,
} from './client.js';
export { exampleRollout, type RolloutResult, type RolloutRow } from './exampleRollout.js';
export { runPolicy, toolCallText, responseText, type PolicyKind } from './policies.js';
export {
  FetchTransport,
  RecordingTransport,
  ReplayTransport,
  TransportError,
  type Exchange,
  type Transport,
} from './transport.js';
