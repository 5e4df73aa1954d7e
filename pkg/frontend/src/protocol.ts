// Wire protocol: one JSON object per WebSocket text frame (or TCP line).
// Mirrors the gateway schema; unknown fields pass through, unknown types
// are rejected at the parse boundary.

import { z } from "zod";

export const PROTOCOL_VERSION = 1;

export const GripperSchema = z.object({
  x: z.number(),
  y: z.number(),
  z: z.number(),
  roll: z.number(),
});

export const PegSchema = z.object({
  id: z.number(),
  x: z.number(),
  y: z.number(),
  orientation: z.number(),
  side: z.number(),
  slot: z.number().nullable(),
});

export const StateSchema = z.object({
  type: z.literal("state"),
  tick: z.number(),
  t_ms: z.number().optional(),
  phase: z.enum(["auto_coarse", "manual_precision", "resetting", "trial_complete"]),
  gripper: GripperSchema,
  jaws_closed: z.boolean(),
  pegs: z.array(PegSchema),
  target: z.number(),
  held: z.boolean(),
  leg: z.number(),
  legs_total: z.number(),
  completed_legs: z.number().optional(),
  seq: z.number(),
}).passthrough();

export const HelloSchema = z.object({
  type: z.literal("hello"),
  version: z.number(),
}).passthrough();

export const EventSchema = z.object({
  type: z.literal("event"),
  tick: z.number(),
  name: z.string(),
  payload: z.record(z.unknown()).optional(),
}).passthrough();

export const ErrorSchema = z.object({
  type: z.literal("error"),
  message: z.string(),
  position: z.number().optional(),
}).passthrough();

export const ServerMessageSchema = z.discriminatedUnion("type", [
  StateSchema,
  HelloSchema,
  EventSchema,
  ErrorSchema,
]);

// Client -> server.
export const InputMessageSchema = z.object({
  type: z.literal("input"),
  seq: z.number().int(),
  dx: z.number().finite(),
  dy: z.number().finite(),
  dz: z.number().finite(),
  droll: z.number().finite(),
  clutch: z.boolean().optional(),
  resume: z.boolean().optional(),
  t_ms: z.number().optional(),
});

export type StateMessage = z.infer<typeof StateSchema>;
export type EventMessage = z.infer<typeof EventSchema>;
export type ServerMessage = z.infer<typeof ServerMessageSchema>;
export type InputMessage = z.infer<typeof InputMessageSchema>;

export function parseServerLine(line: string): ServerMessage {
  return ServerMessageSchema.parse(JSON.parse(line));
}

export function helloLine(): string {
  return JSON.stringify({ type: "hello", version: PROTOCOL_VERSION });
}

export function encodeInput(msg: InputMessage): string {
  return JSON.stringify(InputMessageSchema.parse(msg));
}
