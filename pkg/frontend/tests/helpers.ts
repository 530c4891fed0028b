import WebSocket from "ws";

import { Api, Snapshot, SocketFactory } from "../src/api.js";

export const BASE_URL = "http://127.0.0.1:8741";

/** Node-side WebSocket adapter (the browser build uses the native one). */
export const nodeSocketFactory: SocketFactory = (url) => {
  const ws = new WebSocket(url);
  const snapHandlers: ((snap: Snapshot) => void)[] = [];
  const closeHandlers: (() => void)[] = [];
  ws.on("message", (data) => {
    const snap = JSON.parse(data.toString()) as Snapshot;
    for (const handler of snapHandlers) handler(snap);
  });
  ws.on("close", () => {
    for (const handler of closeHandlers) handler();
  });
  return {
    close: () => ws.close(),
    onSnapshot: (handler) => snapHandlers.push(handler),
    onClose: (handler) => closeHandlers.push(handler),
  };
};

export function liveApi(): Api {
  return new Api(BASE_URL, fetch, nodeSocketFactory);
}
