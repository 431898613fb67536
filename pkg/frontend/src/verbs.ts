/** Playful action verbs, one per flower class. The texts are configurable;
 * only the class name routed to the server matters for the labels. */

export const FLOWER_ACTIONS: Record<string, string> = {
  coltsfoot: "Pick all coltsfoot",
  buttercup: "Polish all buttercups",
  daisy: "Water all daisies",
  windflower: "Shelter all windflowers",
  daffodil: "Trim all daffodils",
  crocus: "Plant all crocuses",
  sunflower: "Cut all sunflowers",
};

export function actionLabel(flowerClass: string): string {
  return FLOWER_ACTIONS[flowerClass] ?? `Tend the ${flowerClass}`;
}
