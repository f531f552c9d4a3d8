import { ApiClient } from "./api.js";
import { ConsoleApp } from "./console.js";

const root = document.getElementById("app");
if (root) {
  const app = new ConsoleApp(root as HTMLElement, new ApiClient(""));
  void app.loadDevices().catch(() => undefined).then(() => app.init());
}
