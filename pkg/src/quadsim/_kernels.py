"""Compiled numeric core.

Every hot-loop computation (rigid-body derivatives, integrators, aero
effects, cascade PID, NNLS) is a numba-jitted function over plain float64
arrays.  The public modules wrap these with validation; the environment calls
the batched variants.  Both routes execute the same scalar kernels, so
sub-step composition is bitwise identical to direct single-drone stepping.

State vector layout (13,):
    0:3   position, world frame [m]
    3:7   quaternion [w, x, y, z], world-from-body
    7:10  linear velocity, world frame [m/s]
    10:13 angular velocity, body frame [rad/s]

Packed model parameter layout (16,): see params.py index constants.
"""

import math

import numpy as np
from numba import njit

# packed[] indices (mirrors params.py)
P_MASS, P_ARM, P_JX, P_JY, P_JZ, P_KF, P_KT, P_RP, P_MAXRPM = range(9)
P_KDX, P_KDY, P_KDZ, P_KG, P_KD1, P_KD2, P_KD3 = range(9, 16)

GE_MIN_HEIGHT_FACTOR = 1.0     # clamp motor altitude at one prop radius
GE_TILT_CUTOFF = math.radians(30.0)
DOWNWASH_MIN_DZ_FACTOR = 1.0   # clamp vertical separation at one prop radius
DOWNWASH_FORCE_CUTOFF = 1e-8   # [N] drop numerically irrelevant far pairs

INTEG_EULER = 0
INTEG_RK4 = 1


@njit(cache=True)
def quat_normalize(q):
    n = math.sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3])
    for i in range(4):
        q[i] /= n


@njit(cache=True)
def quat_rotmat(q, out):
    """World-from-body rotation matrix of a unit quaternion [w,x,y,z]."""
    w, x, y, z = q[0], q[1], q[2], q[3]
    out[0, 0] = 1.0 - 2.0 * (y * y + z * z)
    out[0, 1] = 2.0 * (x * y - w * z)
    out[0, 2] = 2.0 * (x * z + w * y)
    out[1, 0] = 2.0 * (x * y + w * z)
    out[1, 1] = 1.0 - 2.0 * (x * x + z * z)
    out[1, 2] = 2.0 * (y * z - w * x)
    out[2, 0] = 2.0 * (x * z - w * y)
    out[2, 1] = 2.0 * (y * z + w * x)
    out[2, 2] = 1.0 - 2.0 * (x * x + y * y)


@njit(cache=True)
def quat_to_rpy(q):
    """Roll-pitch-yaw (body x-y-z, yaw about world z) of a unit quaternion.

    At gimbal lock (|pitch| = pi/2) roll is set to zero and yaw absorbs the
    free angle.
    """
    w, x, y, z = q[0], q[1], q[2], q[3]
    s = 2.0 * (w * y - x * z)
    if s >= 1.0 - 1e-12:
        pitch = math.pi / 2.0
        roll = 0.0
        yaw = -2.0 * math.atan2(x, w)
    elif s <= -1.0 + 1e-12:
        pitch = -math.pi / 2.0
        roll = 0.0
        yaw = 2.0 * math.atan2(x, w)
    else:
        pitch = math.asin(s)
        roll = math.atan2(2.0 * (w * x + y * z), 1.0 - 2.0 * (x * x + y * y))
        yaw = math.atan2(2.0 * (w * z + x * y), 1.0 - 2.0 * (y * y + z * z))
    return roll, pitch, yaw


@njit(cache=True)
def rpy_to_quat(roll, pitch, yaw, out):
    cr, sr = math.cos(roll * 0.5), math.sin(roll * 0.5)
    cp, sp = math.cos(pitch * 0.5), math.sin(pitch * 0.5)
    cy, sy = math.cos(yaw * 0.5), math.sin(yaw * 0.5)
    out[0] = cy * cp * cr + sy * sp * sr
    out[1] = cy * cp * sr - sy * sp * cr
    out[2] = cy * sp * cr + sy * cp * sr
    out[3] = sy * cp * cr - cy * sp * sr


@njit(cache=True)
def state_deriv(s, rpms, params, motor_xy, ext_f, ext_ge, g, out):
    """Time derivative of the 13-state under motor speeds and extra forces.

    ``ext_f`` is a world-frame force at the center of mass; ``ext_ge`` are
    per-motor thrust bonuses along body +z at the motor stations (they add
    roll/pitch moments but no yaw).
    """
    m = params[P_MASS]
    kf = params[P_KF]
    kt = params[P_KT]

    # linear part
    thrust = 0.0
    tau_x = 0.0
    tau_y = 0.0
    tau_z = 0.0
    for i in range(4):
        fi = kf * rpms[i] * rpms[i] + ext_ge[i]
        thrust += fi
        tau_x += fi * motor_xy[i, 1]
        tau_y -= fi * motor_xy[i, 0]
        if i % 2 == 0:
            tau_z -= kt * rpms[i] * rpms[i]
        else:
            tau_z += kt * rpms[i] * rpms[i]

    r = np.empty((3, 3))
    quat_rotmat(s[3:7], r)
    out[0] = s[7]
    out[1] = s[8]
    out[2] = s[9]
    out[7] = (r[0, 2] * thrust + ext_f[0]) / m
    out[8] = (r[1, 2] * thrust + ext_f[1]) / m
    out[9] = (r[2, 2] * thrust + ext_f[2] - m * g) / m

    # attitude kinematics: qdot = 0.5 * q (x) [0, w]
    qw, qx, qy, qz = s[3], s[4], s[5], s[6]
    wx, wy, wz = s[10], s[11], s[12]
    out[3] = 0.5 * (-qx * wx - qy * wy - qz * wz)
    out[4] = 0.5 * (qw * wx + qy * wz - qz * wy)
    out[5] = 0.5 * (qw * wy - qx * wz + qz * wx)
    out[6] = 0.5 * (qw * wz + qx * wy - qy * wx)

    # body angular acceleration: Jinv (tau - w x (J w))
    jx, jy, jz = params[P_JX], params[P_JY], params[P_JZ]
    hx, hy, hz = jx * wx, jy * wy, jz * wz
    out[10] = (tau_x - (wy * hz - wz * hy)) / jx
    out[11] = (tau_y - (wz * hx - wx * hz)) / jy
    out[12] = (tau_z - (wx * hy - wy * hx)) / jz


@njit(cache=True)
def step_one(s, rpms, params, motor_xy, ext_f, ext_ge, g, dt, integ):
    """Advance one drone state in place by dt (explicit Euler or RK4)."""
    if integ == INTEG_EULER:
        k1 = np.empty(13)
        state_deriv(s, rpms, params, motor_xy, ext_f, ext_ge, g, k1)
        for i in range(13):
            s[i] += dt * k1[i]
    else:
        k1 = np.empty(13)
        k2 = np.empty(13)
        k3 = np.empty(13)
        k4 = np.empty(13)
        tmp = np.empty(13)
        state_deriv(s, rpms, params, motor_xy, ext_f, ext_ge, g, k1)
        for i in range(13):
            tmp[i] = s[i] + 0.5 * dt * k1[i]
        state_deriv(tmp, rpms, params, motor_xy, ext_f, ext_ge, g, k2)
        for i in range(13):
            tmp[i] = s[i] + 0.5 * dt * k2[i]
        state_deriv(tmp, rpms, params, motor_xy, ext_f, ext_ge, g, k3)
        for i in range(13):
            tmp[i] = s[i] + dt * k3[i]
        state_deriv(tmp, rpms, params, motor_xy, ext_f, ext_ge, g, k4)
        for i in range(13):
            s[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    quat_normalize(s[3:7])


@njit(cache=True)
def drag_one(params, s, rpms, out):
    """Eq.-(4)-style rotor drag: world-frame, opposes velocity."""
    omega_sum = 0.0
    for i in range(4):
        omega_sum += 2.0 * math.pi * rpms[i] / 60.0
    out[0] = -params[P_KDX] * omega_sum * s[7]
    out[1] = -params[P_KDY] * omega_sum * s[8]
    out[2] = -params[P_KDZ] * omega_sum * s[9]


@njit(cache=True)
def ground_effect_one(params, motor_xy, s, rpms, out):
    """Per-motor near-ground thrust bonus.

    Motor altitude is clamped at one prop radius; the contribution is zeroed
    past a 30-degree roll/pitch tilt, outside the model's validity.
    """
    roll, pitch, _ = quat_to_rpy(s[3:7])
    if abs(roll) > GE_TILT_CUTOFF or abs(pitch) > GE_TILT_CUTOFF:
        for i in range(4):
            out[i] = 0.0
        return
    r = np.empty((3, 3))
    quat_rotmat(s[3:7], r)
    rp = params[P_RP]
    h_min = GE_MIN_HEIGHT_FACTOR * rp
    kgkf = params[P_KG] * params[P_KF]
    for i in range(4):
        h = s[2] + r[2, 0] * motor_xy[i, 0] + r[2, 1] * motor_xy[i, 1]
        if h < h_min:
            h = h_min
        ratio = rp / (4.0 * h)
        out[i] = kgkf * ratio * ratio * rpms[i] * rpms[i]


@njit(cache=True)
def downwash_pair(params, below_pos, above_pos):
    """Downwash magnitude W (>= 0) the upper vehicle exerts on the lower."""
    dz = above_pos[2] - below_pos[2]
    if dz <= 0.0:
        return 0.0
    rp = params[P_RP]
    if dz < DOWNWASH_MIN_DZ_FACTOR * rp:
        dz = DOWNWASH_MIN_DZ_FACTOR * rp
    dx = above_pos[0] - below_pos[0]
    dy = above_pos[1] - below_pos[1]
    dxy = math.sqrt(dx * dx + dy * dy)
    ratio = rp / (4.0 * dz)
    sigma = params[P_KD2] * dz + params[P_KD3]
    w = params[P_KD1] * ratio * ratio * math.exp(-0.5 * (dxy / sigma) ** 2)
    if w < DOWNWASH_FORCE_CUTOFF:
        return 0.0
    return w


@njit(cache=True)
def accumulate_effects_all(params, motor_xy, states, last_rpms,
                           use_drag, use_ge, use_dw, ext_f, ext_ge):
    """Fill per-drone external force and ground-effect buffers."""
    n = states.shape[0]
    buf3 = np.empty(3)
    for i in range(n):
        ext_f[i, 0] = 0.0
        ext_f[i, 1] = 0.0
        ext_f[i, 2] = 0.0
        if use_drag:
            drag_one(params, states[i], last_rpms[i], buf3)
            ext_f[i, 0] += buf3[0]
            ext_f[i, 1] += buf3[1]
            ext_f[i, 2] += buf3[2]
        if use_ge:
            ground_effect_one(params, motor_xy, states[i], last_rpms[i], ext_ge[i])
        else:
            for k in range(4):
                ext_ge[i, k] = 0.0
        if use_dw:
            for j in range(n):
                if j == i:
                    continue
                if states[j, 2] > states[i, 2]:
                    ext_f[i, 2] -= downwash_pair(params, states[i, 0:3], states[j, 0:3])


@njit(cache=True)
def advance_all(states, last_rpms, cmd_rpms, params, motor_xy, g, dt,
                n_sub, integ, use_drag, use_ge, use_dw, ext_f, ext_ge):
    """One control step: n_sub physics sub-steps with per-sub-step aero."""
    n = states.shape[0]
    for _ in range(n_sub):
        accumulate_effects_all(params, motor_xy, states, last_rpms,
                               use_drag, use_ge, use_dw, ext_f, ext_ge)
        for i in range(n):
            step_one(states[i], cmd_rpms[i], params, motor_xy,
                     ext_f[i], ext_ge[i], g, dt, integ)
            for k in range(4):
                last_rpms[i, k] = cmd_rpms[i, k]


@njit(cache=True)
def fill_obs(states, last_rpms, out):
    """Pack per-drone 20-float observation rows.

    Order: position(3), quaternion(4), roll/pitch/yaw(3), linear velocity(3),
    body angular velocity(3), motor speeds(4).
    """
    n = states.shape[0]
    for i in range(n):
        for k in range(3):
            out[i, k] = states[i, k]
        for k in range(4):
            out[i, 3 + k] = states[i, 3 + k]
        roll, pitch, yaw = quat_to_rpy(states[i, 3:7])
        out[i, 7] = roll
        out[i, 8] = pitch
        out[i, 9] = yaw
        for k in range(3):
            out[i, 10 + k] = states[i, 7 + k]
            out[i, 13 + k] = states[i, 10 + k]
        for k in range(4):
            out[i, 16 + k] = last_rpms[i, k]


@njit(cache=True)
def nnls(a, b, max_iter):
    """Lawson-Hanson non-negative least squares for small dense systems.

    Returns (x, iterations, ok).  The passive-set subproblem is solved via
    normal equations with partially pivoted Gaussian elimination.
    """
    m, n = a.shape
    x = np.zeros(n)
    passive = np.zeros(n, np.bool_)
    resid = np.empty(m)
    w = np.empty(n)
    z = np.zeros(n)

    # stationarity tolerance scaled to the problem
    scale = 0.0
    for j in range(n):
        acc = 0.0
        for i in range(m):
            acc += abs(a[i, j] * b[i])
        if acc > scale:
            scale = acc
    tol = 1e-13 * scale

    iters = 0
    while True:
        for i in range(m):
            acc = b[i]
            for j in range(n):
                acc -= a[i, j] * x[j]
            resid[i] = acc
        best = -1
        best_w = tol
        for j in range(n):
            acc = 0.0
            for i in range(m):
                acc += a[i, j] * resid[i]
            w[j] = acc
            if not passive[j] and acc > best_w:
                best_w = acc
                best = j
        if best < 0:
            return x, iters, True
        passive[best] = True

        while True:
            iters += 1
            if iters > max_iter:
                return x, iters, False
            if not _solve_passive(a, b, passive, z):
                # degenerate subproblem: drop the newest variable and stop
                passive[best] = False
                return x, iters, True
            feasible = True
            for j in range(n):
                if passive[j] and z[j] <= 0.0:
                    feasible = False
                    break
            if feasible:
                for j in range(n):
                    x[j] = z[j] if passive[j] else 0.0
                break
            # step toward z until the first variable hits zero
            alpha = 1.0
            for j in range(n):
                if passive[j] and z[j] <= 0.0:
                    a_j = x[j] / (x[j] - z[j])
                    if a_j < alpha:
                        alpha = a_j
            for j in range(n):
                if passive[j]:
                    x[j] += alpha * (z[j] - x[j])
                    if x[j] <= 1e-14:
                        x[j] = 0.0
                        passive[j] = False


@njit(cache=True)
def _solve_passive(a, b, passive, z):
    """Least-squares on the passive columns; result scattered into z."""
    m, n = a.shape
    idx = np.empty(n, np.int64)
    k = 0
    for j in range(n):
        if passive[j]:
            idx[k] = j
            k += 1
    if k == 0:
        for j in range(n):
            z[j] = 0.0
        return True
    ata = np.empty((k, k))
    atb = np.empty(k)
    for p in range(k):
        jp = idx[p]
        acc = 0.0
        for i in range(m):
            acc += a[i, jp] * b[i]
        atb[p] = acc
        for q in range(k):
            jq = idx[q]
            acc = 0.0
            for i in range(m):
                acc += a[i, jp] * a[i, jq]
            ata[p, q] = acc

    # Gaussian elimination with partial pivoting
    for col in range(k):
        piv = col
        big = abs(ata[col, col])
        for r in range(col + 1, k):
            if abs(ata[r, col]) > big:
                big = abs(ata[r, col])
                piv = r
        if big == 0.0:
            return False
        if piv != col:
            for c in range(k):
                ata[col, c], ata[piv, c] = ata[piv, c], ata[col, c]
            atb[col], atb[piv] = atb[piv], atb[col]
        for r in range(col + 1, k):
            f = ata[r, col] / ata[col, col]
            for c in range(col, k):
                ata[r, c] -= f * ata[col, c]
            atb[r] -= f * atb[col]
    for p in range(k - 1, -1, -1):
        acc = atb[p]
        for q in range(p + 1, k):
            acc -= ata[p, q] * atb[q]
        atb[p] = acc / ata[p, p]
    for j in range(n):
        z[j] = 0.0
    for p in range(k):
        z[idx[p]] = atb[p]
    return True


@njit(cache=True)
def pid_one(params, motor_xy, mix, mix_inv, s, tgt_pos, tgt_vel, tgt_yaw, g,
            gains, ipos_lim, iatt_lim, yaw_tau_lim, ctl, dt, out_rpms):
    """Cascade position/attitude PID mapping a setpoint to saturated RPMs.

    gains layout: pos_p(3) pos_i(3) pos_d(3) att_p(3) att_i(3) att_d(3);
    position gains act on mass-normalized force, attitude gains on
    inertia-normalized torque.  ctl layout: position-error integral(3),
    attitude-error integral(3), previous desired body-z axis(3).
    """
    m = params[P_MASS]

    f_des = np.empty(3)
    for k in range(3):
        e_p = tgt_pos[k] - s[k]
        e_v = tgt_vel[k] - s[7 + k]
        integ = ctl[k] + e_p * dt
        if integ > ipos_lim[k]:
            integ = ipos_lim[k]
        elif integ < -ipos_lim[k]:
            integ = -ipos_lim[k]
        ctl[k] = integ
        f_des[k] = m * (gains[k] * e_p + gains[3 + k] * integ + gains[6 + k] * e_v)
    f_des[2] += m * g

    nf = math.sqrt(f_des[0] ** 2 + f_des[1] ** 2 + f_des[2] ** 2)
    zb = np.empty(3)
    if nf < 1e-9:
        # thrust direction undefined: hold the previous attitude target
        for k in range(3):
            zb[k] = ctl[6 + k]
    else:
        for k in range(3):
            zb[k] = f_des[k] / nf
            ctl[6 + k] = zb[k]

    r = np.empty((3, 3))
    quat_rotmat(s[3:7], r)
    thrust = f_des[0] * r[0, 2] + f_des[1] * r[1, 2] + f_des[2] * r[2, 2]
    if thrust < 0.0:
        thrust = 0.0

    # desired frame from thrust direction and commanded yaw
    cx, sy_ = math.cos(tgt_yaw), math.sin(tgt_yaw)
    yb = np.empty(3)
    yb[0] = zb[1] * 0.0 - zb[2] * sy_
    yb[1] = zb[2] * cx - zb[0] * 0.0
    yb[2] = zb[0] * sy_ - zb[1] * cx
    nyb = math.sqrt(yb[0] ** 2 + yb[1] ** 2 + yb[2] ** 2)
    if nyb < 1e-8:
        # thrust nearly parallel to the yaw heading; fall back to world y
        yb[0], yb[1], yb[2] = -sy_, cx, 0.0
        nyb = 1.0
    for k in range(3):
        yb[k] /= nyb
    xb = np.empty(3)
    xb[0] = yb[1] * zb[2] - yb[2] * zb[1]
    xb[1] = yb[2] * zb[0] - yb[0] * zb[2]
    xb[2] = yb[0] * zb[1] - yb[1] * zb[0]

    # so(3) attitude error between desired columns and actual rotation
    e_r = np.empty(3)
    # E = Rd^T R - R^T Rd; e_r = 0.5 * vee(E)
    rd = np.empty((3, 3))
    for k in range(3):
        rd[k, 0] = xb[k]
        rd[k, 1] = yb[k]
        rd[k, 2] = zb[k]
    e_r[0] = 0.5 * ((rd[0, 2] * r[0, 1] + rd[1, 2] * r[1, 1] + rd[2, 2] * r[2, 1])
                    - (rd[0, 1] * r[0, 2] + rd[1, 1] * r[1, 2] + rd[2, 1] * r[2, 2]))
    e_r[1] = 0.5 * ((rd[0, 0] * r[0, 2] + rd[1, 0] * r[1, 2] + rd[2, 0] * r[2, 2])
                    - (rd[0, 2] * r[0, 0] + rd[1, 2] * r[1, 0] + rd[2, 2] * r[2, 0]))
    e_r[2] = 0.5 * ((rd[0, 1] * r[0, 0] + rd[1, 1] * r[1, 0] + rd[2, 1] * r[2, 0])
                    - (rd[0, 0] * r[0, 1] + rd[1, 0] * r[1, 1] + rd[2, 0] * r[2, 1]))

    tau = np.empty(3)
    for k in range(3):
        integ = ctl[3 + k] + e_r[k] * dt
        if integ > iatt_lim[k]:
            integ = iatt_lim[k]
        elif integ < -iatt_lim[k]:
            integ = -iatt_lim[k]
        ctl[3 + k] = integ
        j_k = params[P_JX + k]
        tau[k] = -j_k * (gains[9 + k] * e_r[k] + gains[12 + k] * integ
                         + gains[15 + k] * s[10 + k])
    if tau[2] > yaw_tau_lim:
        tau[2] = yaw_tau_lim
    elif tau[2] < -yaw_tau_lim:
        tau[2] = -yaw_tau_lim

    rhs = np.empty(4)
    rhs[0] = thrust
    rhs[1] = tau[0]
    rhs[2] = tau[1]
    rhs[3] = tau[2]
    sq = np.empty(4)
    neg = False
    for i in range(4):
        acc = 0.0
        for j in range(4):
            acc += mix_inv[i, j] * rhs[j]
        sq[i] = acc
        if acc < 0.0:
            neg = True
    if neg:
        sq, _, ok = nnls(mix, rhs, 100)
        if not ok:
            for i in range(4):
                sq[i] = 0.0

    max_rpm = params[P_MAXRPM]
    for i in range(4):
        v = math.sqrt(sq[i]) if sq[i] > 0.0 else 0.0
        if v > max_rpm:
            v = max_rpm
        out_rpms[i] = v


@njit(cache=True)
def pid_all(params, motor_xy, mix, mix_inv, states, tgt_pos, tgt_vel, tgt_yaw,
            g, gains, ipos_lim, iatt_lim, yaw_tau_lim, ctl, dt, out_rpms):
    for i in range(states.shape[0]):
        pid_one(params, motor_xy, mix, mix_inv, states[i], tgt_pos[i],
                tgt_vel[i], tgt_yaw[i], g, gains, ipos_lim, iatt_lim,
                yaw_tau_lim, ctl[i], dt, out_rpms[i])


def warmup(params, motor_xy, mix, mix_inv):
    """Force-compile every kernel so timed sections never pay JIT cost."""
    s = np.zeros((1, 13))
    s[0, 3] = 1.0
    s[0, 2] = 1.0
    rpms = np.full((1, 4), 1000.0)
    ext_f = np.zeros((1, 3))
    ext_ge = np.zeros((1, 4))
    obs = np.empty((1, 20))
    ctl = np.zeros((1, 9))
    out = np.empty((1, 4))
    tgt = np.zeros((1, 3))
    gains = np.zeros(18)
    lim = np.full(3, 1.0)
    yaw0 = np.zeros(1)
    for integ in (INTEG_EULER, INTEG_RK4):
        advance_all(s.copy(), rpms.copy(), rpms.copy(), params, motor_xy, 9.8,
                    1.0 / 240.0, 2, integ, True, True, True, ext_f, ext_ge)
    fill_obs(s, rpms, obs)
    pid_all(params, motor_xy, mix, mix_inv, s, tgt, tgt, yaw0, 9.8,
            gains, lim, lim, 1.0, ctl, 1.0 / 48.0, out)
    nnls(np.eye(4), np.array([1.0, -1.0, 2.0, 0.0]), 100)
