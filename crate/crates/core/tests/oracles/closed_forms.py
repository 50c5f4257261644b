# Arbitrary-precision evaluation of the closed forms whose values are frozen
# into the Rust unit tests. Run with: python3 closed_forms.py
from mpmath import mp, mpf, mpc, gamma, sqrt, exp, cos, quad, pi

mp.dps = 40

def bracket(C, G, M, Y, z):
    z = mpc(z)
    return (M - 1j * z) ** Y - M ** Y + (G + 1j * z) ** Y - G ** Y

def exponent_literal(C, G, M, Y, z):
    # C Gamma(Y) [...]
    return C * gamma(Y) * bracket(C, G, M, Y, z)

def cf(C, G, M, Y, z, t):
    return exp(t * C * gamma(-Y) * bracket(C, G, M, Y, z))

def convexity(C, G, M, Y):
    # drift correction consistent with the characteristic function: log E[e^{X_1}]
    return C * gamma(-Y) * ((M - 1) ** Y - M ** Y + (G + 1) ** Y - G ** Y)

def cumulants(C, G, M, Y, r, t):
    z1 = r * t + C * t * gamma(1 - Y) * (M ** (Y - 1) - G ** (Y - 1))
    z2 = C * t * gamma(2 - Y) * (M ** (Y - 2) + G ** (Y - 2))
    z4 = C * t * gamma(4 - Y) * (M ** (Y - 4) + G ** (Y - 4))
    return z1, z2, z4

Y = mpf('1.5')
print('gamma(-1.5)      ', gamma(-Y))
print('gamma(0.3)       ', gamma(mpf('0.3')))
print('gamma(-0.7)      ', gamma(mpf('-0.7')))
print('gamma(2.5)       ', gamma(mpf('2.5')))
print('gamma(-1.3)      ', gamma(mpf('-1.3')))
print('gamma(7.25)      ', gamma(mpf('7.25')))
print('psi(1) literal   ', exponent_literal(1, 25, 26, Y, 1))
print('cf(2, 0.5)       ', cf(1, 25, 26, Y, 2, mpf('0.5')), abs(cf(1, 25, 26, Y, 2, mpf('0.5'))))
print('nu(1,10,20,1.5)  ', convexity(1, 10, 20, Y))
print('cumulants        ', cumulants(1, 25, 26, Y, mpf('0.05'), 1))
z1, z2, z4 = cumulants(1, 25, 26, Y, mpf('0.05'), 1)
print('half width L=8   ', 8 * sqrt(z2 + sqrt(z4)))
a, b, c, d, k = -2, 2, 0, 1, 3
print('chi_3(0,1;-2,2)  ', quad(lambda y: exp(y) * cos(k * pi * (y - a) / (b - a)), [c, d]))
s, lgd = mpf('0.01'), mpf('0.6')
print('pd(0,0.02)       ', 1 - exp(-s * mpf('0.02') / lgd))
print('pd total T=1     ', 1 - exp(-s / lgd))
print('cva unit EE*     ', -(1 - mpf('0.4')) * (1 - exp(-s / lgd)))
print('fva unit EE*     ', -(1 - exp(-mpf('0.005'))))
