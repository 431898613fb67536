import { AnnotationApi } from "./api";
import { generateAnnotatorId } from "./game";
import { mountGarden } from "./ui";
import "./style.css";

const STORAGE_KEY = "garden-annotator-id";

function annotatorId(): string {
  const fromQuery = new URLSearchParams(window.location.search).get("annotator");
  if (fromQuery) {
    return fromQuery;
  }
  let stored = window.localStorage.getItem(STORAGE_KEY);
  if (!stored) {
    stored = generateAnnotatorId();
    window.localStorage.setItem(STORAGE_KEY, stored);
  }
  return stored;
}

const root = document.getElementById("app");
if (!root) {
  throw new Error("missing #app element");
}
const app = mountGarden(root, new AnnotationApi(""), annotatorId());
void app.start();
