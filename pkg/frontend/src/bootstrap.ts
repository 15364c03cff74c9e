// Browser bootstrap; the test suite imports mount() from main.ts directly.

import { mount } from "./main.js";

const root = document.getElementById("app");
if (root) mount(root);
