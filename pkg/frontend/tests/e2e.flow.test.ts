// @vitest-environment node
//
// Full scripted browser flow against a real gateway subprocess:
// select the search action, fill four slots, invoke, page the choices,
// choose option 2, supply the guest name, invoke again, and land on a
// confirmation panel. The DOM is happy-dom; the HTTP is real.

import { ChildProcess, spawn } from "node:child_process";
import { createServer } from "node:net";
import { Window } from "happy-dom";
import { afterAll, beforeAll, expect, it } from "vitest";

import { GatewayClient } from "../src/api.js";
import { ConsoleApp } from "../src/app.js";

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const srv = createServer();
    srv.on("error", reject);
    srv.listen(0, "127.0.0.1", () => {
      const address = srv.address();
      if (address === null || typeof address === "string") {
        reject(new Error("no port"));
        return;
      }
      srv.close(() => resolve(address.port));
    });
  });
}

let gateway: ChildProcess;
let base: string;

beforeAll(async () => {
  const port = await freePort();
  base = `http://127.0.0.1:${port}`;
  gateway = spawn("python3", ["-m", "actionctl.cli", "serve", "--port", String(port)], {
    stdio: ["ignore", "pipe", "pipe"],
  });
  const deadline = Date.now() + 15000;
  for (;;) {
    try {
      const resp = await fetch(`${base}/actions`);
      if (resp.ok) break;
    } catch {
      // not up yet
    }
    if (Date.now() > deadline) throw new Error("gateway did not come up");
    await new Promise((r) => setTimeout(r, 50));
  }
});

afterAll(() => {
  gateway?.kill();
});

it("completes the booking flow on a confirmation panel", async () => {
  const window = new Window();
  const document = window.document;
  document.body.innerHTML = "<main id='app'></main>";
  const root = document.getElementById("app") as unknown as HTMLElement;

  const app = new ConsoleApp(root, new GatewayClient(base));
  await app.start();

  // action list: one card, intent + slot count derived from the annotation
  expect(root.querySelectorAll(".action-card").length).toBe(1);
  expect(root.textContent).toContain("search.lodgingbusiness");
  expect(root.textContent).toContain("4 slots");

  (root.querySelector("button.select") as HTMLButtonElement).click();
  await app.idle();

  // eliciting: constraints render from the slot echoes
  expect(root.querySelectorAll(".slot.pending input").length).toBe(4);
  expect(root.querySelectorAll(".required-marker").length).toBe(4);
  const adults = root.querySelector("input[name='object.numAdults']") as HTMLInputElement;
  expect(adults.type).toBe("number");
  expect(adults.min).toBe("1");
  const checkin = root.querySelector("input[name='object.checkinTime']") as HTMLInputElement;
  expect(checkin.type).toBe("date");
  expect((root.querySelector("button.invoke") as HTMLButtonElement).disabled).toBe(true);

  const setSlot = async (name: string, value: string) => {
    const input = root.querySelector(`input[name='${name}']`) as HTMLInputElement;
    input.value = value;
    input.dispatchEvent(new window.Event("change"));
    await app.idle();
  };
  await setSlot("object.checkinTime", "2018-01-01");
  await setSlot("object.checkoutTime", "2018-01-02");
  await setSlot("object.numAdults", "1");
  await setSlot("object.numChildren", "0");

  // every slot bound: invoke becomes available, fields turn read-only
  expect(root.textContent).toContain("ReadyToInvoke");
  expect(root.querySelectorAll(".slot.bound input").length).toBe(4);
  const bound = root.querySelector("input[name='object.numAdults']") as HTMLInputElement;
  expect(bound.readOnly).toBe(true);
  const invoke = root.querySelector("button.invoke") as HTMLButtonElement;
  expect(invoke.disabled).toBe(false);
  invoke.click();
  await app.idle();

  // presenting: four offers, first page of three plus a more control
  expect(root.textContent).toContain("found 4 items");
  expect(root.querySelectorAll(".choice-card").length).toBe(3);
  (root.querySelector("button.more") as HTMLButtonElement).click();
  await app.idle();
  const cards = root.querySelectorAll(".choice-card");
  expect(cards.length).toBe(4);
  expect(cards[1].textContent).toContain("Doppelzimmer");

  // option 2 is the Doppelzimmer; choosing hands over to the buy action
  (cards[1].querySelector("button.choose") as HTMLButtonElement).click();
  await app.idle();
  expect(root.textContent).toContain("buy.offer");
  expect(root.querySelectorAll(".slot.pending input").length).toBe(1);

  await setSlot("result.underName.name", "Max Mustermann");
  (root.querySelector("button.invoke") as HTMLButtonElement).click();
  await app.idle();

  // confirmation panel with the booking number; the mock really booked
  expect(root.querySelector(".confirmation-panel")).toBeTruthy();
  expect(root.querySelector(".confirmation-number")?.textContent).toBe("C-1");
  const stats = await (await fetch(`${base}/mock/stats`)).json();
  expect(stats.bookings).toBe(1);

  // restart returns to the action list for a fresh session
  (root.querySelector("button.restart") as HTMLButtonElement).click();
  await app.idle();
  expect(root.querySelectorAll(".action-card").length).toBe(1);
});
