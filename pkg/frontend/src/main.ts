import { GatewayClient } from "./api.js";
import { ConsoleApp } from "./app.js";

const root = document.getElementById("app");
if (root) {
  const app = new ConsoleApp(root, new GatewayClient(window.location.origin));
  void app.start();
}
