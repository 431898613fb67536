/** Session scoring: +10 per accepted answer plus a streak bonus of +2 for
 * every consecutive answer already on the streak. A rejected duplicate
 * (conflict) changes nothing. */

export interface SessionState {
  annotatorId: string;
  score: number;
  streak: number;
  answered: number;
}

export function newSession(annotatorId: string): SessionState {
  if (!annotatorId) {
    throw new Error("annotatorId must be non-empty");
  }
  return { annotatorId, score: 0, streak: 0, answered: 0 };
}

export function pointsForNextAnswer(state: SessionState): number {
  return 10 + 2 * state.streak;
}

export function applyAccepted(state: SessionState): SessionState {
  return {
    ...state,
    score: state.score + pointsForNextAnswer(state),
    streak: state.streak + 1,
    answered: state.answered + 1,
  };
}

export function applyConflict(state: SessionState): SessionState {
  return { ...state };
}

export function generateAnnotatorId(): string {
  const suffix = Math.random().toString(36).slice(2, 8);
  return `gardener-${suffix}`;
}
