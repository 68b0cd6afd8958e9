import { SceneServiceClient } from "./api";
import { buildEditor } from "./ui";

const root = document.getElementById("app");
if (!root) throw new Error("missing #app mount point");

// same-origin: the engine serves this bundle next to its API
buildEditor(root, new SceneServiceClient(""));
