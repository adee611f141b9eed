/**
 * Thin wrapper around the preprocessing CLI. The trainer talks to it only
 * through files and command lines: NIfTI volumes in, manifests / splits /
 * preprocessed volumes / metrics JSON out.
 *
 * Resolution order: the CMRPIPE environment variable (split on spaces),
 * a `cmrpipe` executable on PATH, then `python3 -m cmrpipe.cli`.
 */

import { spawnSync } from "node:child_process";

export class CmrpipeError extends Error {}

let resolved: string[] | null = null;

function resolveCommand(): string[] {
  if (resolved) return resolved;
  const fromEnv = process.env.CMRPIPE;
  if (fromEnv && fromEnv.trim()) {
    resolved = fromEnv.trim().split(/\s+/);
    return resolved;
  }
  const probe = spawnSync("cmrpipe", ["--version"], { encoding: "utf8" });
  if (!probe.error && probe.status === 0) {
    resolved = ["cmrpipe"];
    return resolved;
  }
  resolved = ["python3", "-m", "cmrpipe.cli"];
  return resolved;
}

export interface RunResult {
  stdout: string;
  stderr: string;
}

/** Run one cmrpipe subcommand; throws CmrpipeError on a nonzero exit. */
export function cmrpipe(args: string[], opts: { cwd?: string } = {}): RunResult {
  const [cmd, ...prefix] = resolveCommand();
  const full = [...prefix, ...args];
  const result = spawnSync(cmd, full, {
    encoding: "utf8",
    cwd: opts.cwd,
    maxBuffer: 64 * 1024 * 1024,
  });
  if (result.error) {
    throw new CmrpipeError(`failed to launch ${cmd}: ${result.error.message}`);
  }
  if (result.status !== 0) {
    throw new CmrpipeError(
      `cmrpipe ${args.join(" ")} exited with ${result.status}\n` +
        `stdout:\n${result.stdout}\nstderr:\n${result.stderr}`,
    );
  }
  return { stdout: result.stdout, stderr: result.stderr };
}

/** True when some cmrpipe invocation works in this environment. */
export function cmrpipeAvailable(): boolean {
  try {
    cmrpipe(["--version"]);
    return true;
  } catch {
    return false;
  }
}
